#include "tailmix/encoder.hpp"

#include <cmath>
#include <string>

#include "tailmix/error.hpp"
#include "tailmix/kernels.hpp"

namespace tailmix {

Encoder make_encoder(const std::vector<int>& widths, int num_classes, Rng& rng) {
    if (widths.size() < 2) throw ConfigError("encoder needs at least input and embedding widths");
    for (int w : widths)
        if (w <= 0) throw ConfigError("encoder widths must be positive");

    auto init_layer = [&rng](int fan_in, int fan_out) {
        AffineLayer layer;
        layer.weight = Matrix(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : layer.weight.data) w = (2.0 * rng.uniform() - 1.0) * bound;
        return layer;
    };

    Encoder enc;
    for (size_t k = 0; k + 1 < widths.size(); ++k)
        enc.layers.push_back(init_layer(widths[k], widths[k + 1]));
    if (num_classes > 0) enc.classifier_head = init_layer(widths.back(), num_classes);
    return enc;
}

ForwardTrace forward(const Encoder& enc, const Matrix& inputs) {
    if (enc.layers.empty()) throw StateError("forward: encoder has no layers");
    check_dim(inputs.cols == enc.input_dim(), "forward: input width " + std::to_string(inputs.cols) +
                                                  " does not match encoder input " +
                                                  std::to_string(enc.input_dim()));
    check_dim(inputs.rows >= 1, "forward: empty batch");

    ForwardTrace trace;
    const int L = static_cast<int>(enc.layers.size());
    trace.layer_inputs.reserve(L);
    trace.preacts.reserve(L);

    Matrix act = inputs;
    for (int k = 0; k < L; ++k) {
        const auto& layer = enc.layers[k];
        check_dim(act.cols == layer.fan_in(), "forward: layer " + std::to_string(k) + " width chain broken");
        Matrix pre(act.rows, layer.fan_out());
        kernels::affine_forward(act, layer.weight, layer.bias, pre);
        if (!pre.all_finite())
            throw NumericError("forward: non-finite output at layer " + std::to_string(k));
        trace.layer_inputs.push_back(std::move(act));
        if (k + 1 < L) {
            act = Matrix(pre.rows, pre.cols);
            kernels::relu_forward(pre, act);
        } else {
            trace.embeddings = pre;
        }
        trace.preacts.push_back(std::move(pre));
    }

    if (enc.classifier_head) {
        const auto& head = *enc.classifier_head;
        Matrix logits(trace.embeddings.rows, head.fan_out());
        kernels::affine_forward(trace.embeddings, head.weight, head.bias, logits);
        if (!logits.all_finite()) throw NumericError("forward: non-finite output at classifier head");
        trace.logits = std::move(logits);
    }
    return trace;
}

void GradientTape::zero() {
    for (auto& g : weight_grads) g.fill(0.0);
    for (auto& g : bias_grads) std::fill(g.begin(), g.end(), 0.0);
    if (head_weight_grad) head_weight_grad->fill(0.0);
    if (head_bias_grad) std::fill(head_bias_grad->begin(), head_bias_grad->end(), 0.0);
    prototype_grads.fill(0.0);
    loss = 0.0;
}

GradientTape make_tape(const Encoder& enc, const Matrix* prototypes) {
    GradientTape tape;
    for (const auto& layer : enc.layers) {
        tape.weight_grads.emplace_back(layer.fan_out(), layer.fan_in());
        tape.bias_grads.emplace_back(layer.fan_out(), 0.0);
    }
    if (enc.classifier_head) {
        tape.head_weight_grad = Matrix(enc.classifier_head->fan_out(), enc.classifier_head->fan_in());
        tape.head_bias_grad = std::vector<double>(enc.classifier_head->fan_out(), 0.0);
    }
    if (prototypes) tape.prototype_grads = Matrix(prototypes->rows, prototypes->cols);
    return tape;
}

namespace {

void check_trace(const Encoder& enc, const ForwardTrace& trace) {
    if (trace.layer_inputs.size() != enc.layers.size() || trace.preacts.size() != enc.layers.size())
        throw StateError("backward: trace does not match a forward pass over this encoder");
}

void backprop_layers(const Encoder& enc, const ForwardTrace& trace, Matrix grad, GradientTape& tape) {
    // grad arrives as d(loss)/d(preact) of the last layer and is chained down.
    for (int k = static_cast<int>(enc.layers.size()) - 1; k >= 0; --k) {
        const auto& layer = enc.layers[k];
        kernels::affine_backward_params(grad, trace.layer_inputs[k], tape.weight_grads[k],
                                        tape.bias_grads[k]);
        if (k == 0) break;
        Matrix dinput(grad.rows, layer.fan_in());
        kernels::affine_backward_data(grad, layer.weight, dinput);
        grad = Matrix(dinput.rows, dinput.cols);
        kernels::relu_backward(dinput, trace.preacts[k - 1], grad);
    }
}

} // namespace

void backward_from_logits(const Encoder& enc, const ForwardTrace& trace, const Matrix& dlogits,
                          GradientTape& tape) {
    check_trace(enc, trace);
    if (!enc.classifier_head || !trace.logits)
        throw StateError("backward_from_logits: encoder has no classifier head");
    check_dim(dlogits.same_shape(*trace.logits), "backward_from_logits: gradient shape mismatch");
    if (!tape.head_weight_grad) throw StateError("backward_from_logits: tape built without head buffers");

    const auto& head = *enc.classifier_head;
    kernels::affine_backward_params(dlogits, trace.embeddings, *tape.head_weight_grad,
                                    *tape.head_bias_grad);
    Matrix demb(dlogits.rows, head.fan_in());
    kernels::affine_backward_data(dlogits, head.weight, demb);
    backprop_layers(enc, trace, std::move(demb), tape);
}

void backward_from_embeddings(const Encoder& enc, const ForwardTrace& trace, const Matrix& dembeddings,
                              GradientTape& tape) {
    check_trace(enc, trace);
    check_dim(dembeddings.same_shape(trace.embeddings),
              "backward_from_embeddings: gradient shape mismatch");
    backprop_layers(enc, trace, dembeddings, tape);
}

} // namespace tailmix
