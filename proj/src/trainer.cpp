#include "tailmix/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tailmix/checkpoint.hpp"
#include "tailmix/losses.hpp"

namespace tailmix {

const char* head_type_name(HeadType h) {
    return h == HeadType::softmax ? "softmax" : "prototype";
}

HeadType head_type_from_name(const std::string& name) {
    if (name == "softmax") return HeadType::softmax;
    if (name == "prototype") return HeadType::prototype;
    throw ConfigError("unknown head type '" + name + "' (expected softmax or prototype)");
}

void validate_method_config(const MethodConfig& cfg) {
    if (cfg.alpha <= 0.0) throw ConfigError("alpha must be positive");
    if (cfg.mixup_fraction < 0.0 || cfg.mixup_fraction > 1.0)
        throw ConfigError("mixup_fraction must be in [0, 1]");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (cfg.lr_decay <= 0.0 || cfg.lr_decay > 1.0) throw ConfigError("lr_decay must be in (0, 1]");
    if (cfg.gamma_d <= 0.0) throw ConfigError("gamma_d must be positive");
    if (cfg.w_mse < 0.0) throw ConfigError("w_mse must be >= 0");
    if (cfg.mix_loss_weight < 0.0) throw ConfigError("mix_loss_weight must be >= 0");
    if (cfg.embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    for (int h : cfg.hidden)
        if (h < 1) throw ConfigError("hidden widths must be >= 1");
    if (cfg.two_forward && cfg.head_type != HeadType::softmax)
        throw ConfigError("two_forward applies to the softmax head only");
}

Batch make_batch(const Dataset& train, const PairSampler* sampler, const MethodConfig& cfg,
                 Rng& rng) {
    Batch b;
    long n_std, n_pairs;
    if (sampler && cfg.mixup_fraction > 0.0) {
        n_std = std::llround((1.0 - cfg.mixup_fraction) * cfg.batch_size);
        n_pairs = std::llround(cfg.mixup_fraction * cfg.batch_size);
    } else {
        n_std = cfg.batch_size;
        n_pairs = 0;
    }
    b.standard.reserve(n_std);
    for (long i = 0; i < n_std; ++i)
        b.standard.push_back(static_cast<long>(rng.uniform_below(train.samples.size())));
    b.pairs.reserve(n_pairs);
    for (long i = 0; i < n_pairs; ++i) b.pairs.push_back(sampler->sample(rng));
    return b;
}

TrainerState init_trainer(const MethodConfig& cfg, const Dataset& train,
                          const SubsetPartition& partition) {
    validate_method_config(cfg);
    if (train.samples.empty()) throw ConfigError("training set is empty");
    if (train.class_count < 2) throw ConfigError("training set needs at least 2 classes");
    if (partition.total_classes() != train.class_count)
        throw ConfigError("partition covers " + std::to_string(partition.total_classes()) +
                          " classes but the training set has " +
                          std::to_string(train.class_count));
    // Fail fast on an unservable strategy even if the mixup fraction is 0.
    if (cfg.strategy) PairSampler probe(train, partition, *cfg.strategy, cfg.alpha);

    TrainerState st;
    st.cfg = cfg;
    st.rng = Rng(cfg.seed);

    std::vector<int> widths;
    widths.push_back(train.feature_dim());
    for (int h : cfg.hidden) widths.push_back(h);
    widths.push_back(cfg.embedding_dim);
    int head_classes = cfg.head_type == HeadType::softmax ? train.class_count : 0;
    st.encoder = make_encoder(widths, head_classes, st.rng);

    if (cfg.head_type == HeadType::prototype)
        st.bank = init_prototypes(train, st.encoder, cfg.proto_init, cfg.gamma_d, cfg.w_mse,
                                  st.rng);

    st.adam = make_adam_state(st.encoder, st.bank ? &st.bank->prototypes : nullptr,
                              cfg.learning_rate, cfg.lr_decay, 0.9, 0.999, 1e-8);
    return st;
}

namespace {

Matrix gather_rows(const Dataset& ds, const std::vector<long>& idx) {
    Matrix x(static_cast<int>(idx.size()), ds.feature_dim());
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& f = ds.samples[idx[i]].features;
        std::copy(f.begin(), f.end(), x.data.begin() + static_cast<long>(i) * x.cols);
    }
    return x;
}

// Standard-sample term: mean CE or mean standard prototype loss; returns the
// summed per-sample loss and accumulates gradients scaled by 1/n.
double standard_pass(const TrainerState& st, const Dataset& train, const Batch& b,
                     GradientTape& tape) {
    const long n = static_cast<long>(b.standard.size());
    Matrix x = gather_rows(train, b.standard);
    ForwardTrace trace = forward(st.encoder, x);
    const double scale = 1.0 / static_cast<double>(n);
    double loss_sum = 0.0;

    if (st.cfg.head_type == HeadType::softmax) {
        Matrix dlogits(trace.logits->rows, trace.logits->cols);
        dlogits.fill(0.0);
        for (long i = 0; i < n; ++i) {
            int y = train.samples[b.standard[i]].label;
            loss_sum += softmax_ce(trace.logits->row(static_cast<int>(i)), y);
            softmax_ce_grad(trace.logits->row(static_cast<int>(i)), y, scale,
                            dlogits.row(static_cast<int>(i)));
        }
        backward_from_logits(st.encoder, trace, dlogits, tape);
    } else {
        Matrix demb(trace.embeddings.rows, trace.embeddings.cols);
        demb.fill(0.0);
        for (long i = 0; i < n; ++i) {
            int y = train.samples[b.standard[i]].label;
            auto f = trace.embeddings.row(static_cast<int>(i));
            loss_sum += standard_prototype_loss(f, y, *st.bank);
            standard_prototype_loss_grad(f, y, *st.bank, scale, demb.row(static_cast<int>(i)),
                                         tape.prototype_grads);
        }
        backward_from_embeddings(st.encoder, trace, demb, tape);
    }
    return loss_sum;
}

Matrix gather_pair_side(const std::vector<MixupPair>& pairs, bool first) {
    Matrix x(static_cast<int>(pairs.size()), static_cast<int>(pairs.front().x_i.size()));
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& f = first ? pairs[i].x_i : pairs[i].x_j;
        std::copy(f.begin(), f.end(), x.data.begin() + static_cast<long>(i) * x.cols);
    }
    return x;
}

Matrix gather_mixed(const std::vector<MixupPair>& pairs) {
    Matrix x(static_cast<int>(pairs.size()),
             static_cast<int>(pairs.front().mixed_input.size()));
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& f = pairs[i].mixed_input;
        std::copy(f.begin(), f.end(), x.data.begin() + static_cast<long>(i) * x.cols);
    }
    return x;
}

// Mixup term: mean over pairs, gradients scaled by mix_loss_weight/n.
double mixup_pass(const TrainerState& st, const Batch& b, GradientTape& tape) {
    const long n = static_cast<long>(b.pairs.size());
    const double scale = st.cfg.mix_loss_weight / static_cast<double>(n);
    double loss_sum = 0.0;

    if (st.cfg.head_type == HeadType::softmax && st.cfg.two_forward) {
        Matrix xi = gather_pair_side(b.pairs, true);
        Matrix xj = gather_pair_side(b.pairs, false);
        ForwardTrace ti = forward(st.encoder, xi);
        ForwardTrace tj = forward(st.encoder, xj);
        Matrix di(ti.logits->rows, ti.logits->cols), dj(tj.logits->rows, tj.logits->cols);
        di.fill(0.0);
        dj.fill(0.0);
        for (long i = 0; i < n; ++i) {
            const MixupPair& p = b.pairs[i];
            auto li = ti.logits->row(static_cast<int>(i));
            auto lj = tj.logits->row(static_cast<int>(i));
            loss_sum += p.lambda * softmax_ce(li, p.y_i) +
                        (1.0 - p.lambda) * softmax_ce(lj, p.y_j);
            softmax_ce_grad(li, p.y_i, scale * p.lambda, di.row(static_cast<int>(i)));
            softmax_ce_grad(lj, p.y_j, scale * (1.0 - p.lambda), dj.row(static_cast<int>(i)));
        }
        backward_from_logits(st.encoder, ti, di, tape);
        backward_from_logits(st.encoder, tj, dj, tape);
        return loss_sum;
    }

    Matrix xm = gather_mixed(b.pairs);
    ForwardTrace trace = forward(st.encoder, xm);
    if (st.cfg.head_type == HeadType::softmax) {
        Matrix dlogits(trace.logits->rows, trace.logits->cols);
        dlogits.fill(0.0);
        for (long i = 0; i < n; ++i) {
            const MixupPair& p = b.pairs[i];
            auto l = trace.logits->row(static_cast<int>(i));
            loss_sum += mixup_ce_loss(l, p.y_i, p.y_j, p.lambda);
            mixup_ce_grad(l, p.y_i, p.y_j, p.lambda, scale, dlogits.row(static_cast<int>(i)));
        }
        backward_from_logits(st.encoder, trace, dlogits, tape);
    } else {
        Matrix demb(trace.embeddings.rows, trace.embeddings.cols);
        demb.fill(0.0);
        for (long i = 0; i < n; ++i) {
            const MixupPair& p = b.pairs[i];
            auto f = trace.embeddings.row(static_cast<int>(i));
            loss_sum += total_mixup_prototype_loss(f, p.y_i, p.y_j, p.lambda, *st.bank);
            total_mixup_prototype_loss_grad(f, p.y_i, p.y_j, p.lambda, *st.bank, scale,
                                            demb.row(static_cast<int>(i)), tape.prototype_grads);
        }
        backward_from_embeddings(st.encoder, trace, demb, tape);
    }
    return loss_sum;
}

} // namespace

ReportFragment evaluate_closed_set(const Encoder& encoder, const PrototypeBank* bank,
                                   const Dataset& data, const SubsetPartition& partition,
                                   ProtoScore score_mode) {
    if (data.samples.empty()) throw MetricError("cannot evaluate an empty dataset");
    Matrix x(static_cast<int>(data.samples.size()), data.feature_dim());
    for (size_t i = 0; i < data.samples.size(); ++i)
        std::copy(data.samples[i].features.begin(), data.samples[i].features.end(),
                  x.data.begin() + static_cast<long>(i) * x.cols);
    ForwardTrace trace = forward(encoder, x);

    std::vector<int> preds(data.samples.size()), labels(data.samples.size());
    for (int i = 0; i < x.rows; ++i) {
        Confidence c = bank ? confidence_prototype(trace.embeddings.row(i), *bank, score_mode)
                            : confidence_softmax(trace.logits->row(i));
        preds[i] = c.predicted;
        labels[i] = data.samples[i].label;
    }
    int m = bank ? bank->num_classes() : encoder.logit_dim();
    return classification_report(preds, labels, partition, m);
}

void train_epoch(TrainerState& st, const Dataset& train, const Dataset& val,
                 const SubsetPartition& partition) {
    std::optional<PairSampler> sampler;
    if (st.cfg.strategy) sampler.emplace(train, partition, *st.cfg.strategy, st.cfg.alpha);

    const long steps = (train.size() + st.cfg.batch_size - 1) / st.cfg.batch_size;
    GradientTape tape = make_tape(st.encoder, st.bank ? &st.bank->prototypes : nullptr);

    double std_loss_sum = 0, mix_loss_sum = 0;
    long std_count = 0, mix_count = 0;
    for (long step = 0; step < steps; ++step) {
        Batch b = make_batch(train, sampler ? &*sampler : nullptr, st.cfg, st.rng);
        tape.zero();
        double batch_std = 0, batch_mix = 0;
        try {
            if (!b.standard.empty()) batch_std = standard_pass(st, train, b, tape);
            if (!b.pairs.empty()) batch_mix = mixup_pass(st, b, tape);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(st.epoch + 1) + ", step " +
                               std::to_string(step + 1) + ": " + e.what());
        }
        if (!std::isfinite(batch_std) || !std::isfinite(batch_mix))
            throw NumericError("non-finite training loss at epoch " +
                               std::to_string(st.epoch + 1) + ", step " + std::to_string(step + 1));
        adam_step(st.adam, st.encoder, st.bank ? &st.bank->prototypes : nullptr, tape, st.epoch);
        std_loss_sum += batch_std;
        mix_loss_sum += batch_mix;
        std_count += static_cast<long>(b.standard.size());
        mix_count += static_cast<long>(b.pairs.size());
    }

    EpochStats stats;
    stats.epoch = st.epoch + 1;
    stats.loss_standard = std_count ? std_loss_sum / static_cast<double>(std_count) : 0.0;
    stats.loss_mixup = mix_count ? mix_loss_sum / static_cast<double>(mix_count) : 0.0;
    stats.train_loss = stats.loss_standard + st.cfg.mix_loss_weight * stats.loss_mixup;

    ReportFragment frag = evaluate_closed_set(st.encoder, st.bank ? &*st.bank : nullptr, val,
                                              partition, st.cfg.proto_score);
    stats.val_acc_head = frag.acc_head;
    stats.val_acc_middle = frag.acc_middle;
    stats.val_acc_tail = frag.acc_tail;
    stats.val_acc_total = frag.acc_total;

    st.epoch += 1;
    st.history.push_back(stats);
    if (stats.val_acc_total > st.best_val_acc) {
        st.best_val_acc = stats.val_acc_total;
        st.best_epoch = st.epoch;
    }
}

void write_history_csv(const TrainingHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StateError("cannot write " + path);
    out << "epoch,train_loss,loss_standard,loss_mixup,val_acc_head,val_acc_middle,val_acc_tail,"
           "val_acc_total\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
    };
    for (const auto& e : history) {
        out << e.epoch;
        put(e.train_loss);
        put(e.loss_standard);
        put(e.loss_mixup);
        put(e.val_acc_head);
        put(e.val_acc_middle);
        put(e.val_acc_tail);
        put(e.val_acc_total);
        out << '\n';
    }
}

TrainResult train(const MethodConfig& cfg, const Dataset& train_set, const Dataset& val,
                  const SubsetPartition& partition, const std::string& run_dir) {
    TrainerState st = init_trainer(cfg, train_set, partition);
    TrainerState best = st;

    for (int e = 0; e < cfg.epochs; ++e) {
        int prev_best = st.best_epoch;
        train_epoch(st, train_set, val, partition);
        if (st.best_epoch != prev_best) best = st;
    }

    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        save_checkpoint(st, run_dir + "/checkpoint_final.txt");
        if (st.best_epoch >= 0) save_checkpoint(best, run_dir + "/checkpoint_best.txt");
        write_history_csv(st.history, run_dir + "/history.csv");
    }

    TrainResult out;
    out.encoder = std::move(st.encoder);
    out.bank = std::move(st.bank);
    out.history = std::move(st.history);
    out.best_epoch = st.best_epoch;
    out.best_val_acc = st.best_val_acc;
    return out;
}

} // namespace tailmix
