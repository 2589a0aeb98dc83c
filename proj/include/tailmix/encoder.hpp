#pragma once
#include <optional>
#include <vector>

#include "tailmix/matrix.hpp"
#include "tailmix/rng.hpp"

namespace tailmix {

struct AffineLayer {
    Matrix weight;            // out x in
    std::vector<double> bias; // out
    int fan_in() const { return weight.cols; }
    int fan_out() const { return weight.rows; }
};

// Dense encoder: a chain of affine layers with a rectified-linear activation
// after every layer except the last. The last layer's output is the
// embedding f(x). An optional classifier head maps embeddings to logits; it
// is absent when a prototype bank provides the classification rule.
struct Encoder {
    std::vector<AffineLayer> layers;
    std::optional<AffineLayer> classifier_head;

    int input_dim() const { return layers.empty() ? 0 : layers.front().fan_in(); }
    int embedding_dim() const { return layers.empty() ? 0 : layers.back().fan_out(); }
    int logit_dim() const { return classifier_head ? classifier_head->fan_out() : 0; }
};

// widths = {input, hidden..., embedding}. Weights are Glorot-uniform
// (+-sqrt(6/(fan_in+fan_out))), biases zero. num_classes > 0 attaches a
// classifier head of that width.
Encoder make_encoder(const std::vector<int>& widths, int num_classes, Rng& rng);

// Everything backward() needs from the matching forward() call.
struct ForwardTrace {
    std::vector<Matrix> layer_inputs; // activation entering layer k
    std::vector<Matrix> preacts;      // affine output of layer k
    Matrix embeddings;
    std::optional<Matrix> logits;
};

// Batch forward pass. Throws DimensionError on width mismatch and
// NumericError (naming the layer) if any output is non-finite.
ForwardTrace forward(const Encoder& enc, const Matrix& inputs);

// Per-parameter gradient buffers, shaped like the encoder plus (optionally)
// a prototype bank. Zero before each accumulation pass.
struct GradientTape {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
    std::optional<Matrix> head_weight_grad;
    std::optional<std::vector<double>> head_bias_grad;
    Matrix prototype_grads; // empty when no bank is attached
    double loss = 0.0;

    void zero();
};

GradientTape make_tape(const Encoder& enc, const Matrix* prototypes = nullptr);

// Reverse pass from d(loss)/d(logits). Requires the trace's logits.
void backward_from_logits(const Encoder& enc, const ForwardTrace& trace, const Matrix& dlogits,
                          GradientTape& tape);

// Reverse pass from d(loss)/d(embeddings); used by the prototype head,
// whose own gradients are accumulated separately into the tape.
void backward_from_embeddings(const Encoder& enc, const ForwardTrace& trace, const Matrix& dembeddings,
                              GradientTape& tape);

// Visit every trainable scalar in a fixed order (layer weights row-major,
// layer biases, head, then prototypes). The same order is used by the
// optimizer, the checkpoint format, and the finite-difference tests.
template <typename F>
void for_each_parameter(Encoder& enc, Matrix* prototypes, F&& fn) {
    for (auto& layer : enc.layers) {
        for (double& w : layer.weight.data) fn(w);
        for (double& b : layer.bias) fn(b);
    }
    if (enc.classifier_head) {
        for (double& w : enc.classifier_head->weight.data) fn(w);
        for (double& b : enc.classifier_head->bias) fn(b);
    }
    if (prototypes)
        for (double& p : prototypes->data) fn(p);
}

template <typename F>
void for_each_gradient(const GradientTape& tape, F&& fn) {
    for (size_t k = 0; k < tape.weight_grads.size(); ++k) {
        for (const double& g : tape.weight_grads[k].data) fn(g);
        for (const double& g : tape.bias_grads[k]) fn(g);
    }
    if (tape.head_weight_grad) {
        for (const double& g : tape.head_weight_grad->data) fn(g);
        for (const double& g : *tape.head_bias_grad) fn(g);
    }
    for (const double& g : tape.prototype_grads.data) fn(g);
}

} // namespace tailmix
