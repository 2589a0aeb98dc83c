#pragma once
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tailmix/adam.hpp"
#include "tailmix/dataset.hpp"
#include "tailmix/encoder.hpp"
#include "tailmix/mixup.hpp"
#include "tailmix/oodeval.hpp"
#include "tailmix/prototype.hpp"

namespace tailmix {

enum class HeadType { softmax, prototype };

const char* head_type_name(HeadType h);
HeadType head_type_from_name(const std::string& name);

// One training configuration. Prototype fields are ignored unless head_type
// is prototype; mixup fields are ignored unless a strategy is set.
struct MethodConfig {
    HeadType head_type = HeadType::softmax;
    std::optional<MixupStrategy> strategy;
    double alpha = 0.2;
    double mixup_fraction = 0.2; // share of each batch built from mixup pairs
    int epochs = 45;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double lr_decay = 0.95;
    double gamma_d = 0.25;
    double w_mse = 0.1;
    double mix_loss_weight = 0.3;
    // Evaluate the mixup cross-entropy on two separate forward passes of the
    // raw inputs instead of one pass of the mixed input (softmax head only).
    bool two_forward = false;
    ProtoInit proto_init = ProtoInit::class_mean;
    ProtoScore proto_score = ProtoScore::neg_min_distance;
    std::vector<int> hidden = {64};
    int embedding_dim = 32;
    uint64_t seed = 1;
};

void validate_method_config(const MethodConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;    // loss_standard + mix_loss_weight * loss_mixup
    double loss_standard = 0; // mean per-sample loss over the standard part
    double loss_mixup = 0;    // mean per-pair loss over the mixup part
    double val_acc_head = 0, val_acc_middle = 0, val_acc_tail = 0, val_acc_total = 0;
};

using TrainingHistory = std::vector<EpochStats>;

struct Batch {
    std::vector<long> standard; // indices into the train set
    std::vector<MixupPair> pairs;
};

// round((1-rho) * batch_size) uniform draws from the full train set plus
// round(rho * batch_size) strategy pairs; all standard when no strategy.
Batch make_batch(const Dataset& train, const PairSampler* sampler, const MethodConfig& cfg,
                 Rng& rng);

// Everything a run carries between epochs; checkpoints serialize exactly
// this.
struct TrainerState {
    MethodConfig cfg;
    Encoder encoder;
    std::optional<PrototypeBank> bank;
    AdamState adam;
    Rng rng;
    int epoch = 0; // completed epochs
    TrainingHistory history;
    int best_epoch = -1;
    double best_val_acc = -1.0;
};

// Builds encoder, prototypes, and optimizer state from the config; fails
// fast on strategy subsets the train split cannot serve.
TrainerState init_trainer(const MethodConfig& cfg, const Dataset& train,
                          const SubsetPartition& partition);

// One pass over ceil(|train| / batch_size) batches, then a validation sweep.
void train_epoch(TrainerState& st, const Dataset& train, const Dataset& val,
                 const SubsetPartition& partition);

struct TrainResult {
    Encoder encoder;
    std::optional<PrototypeBank> bank;
    TrainingHistory history;
    int best_epoch = -1;
    double best_val_acc = -1.0;
};

// Full run. When run_dir is nonempty, writes checkpoint_final.txt,
// checkpoint_best.txt (best total validation accuracy, earliest epoch on
// ties), and history.csv there.
TrainResult train(const MethodConfig& cfg, const Dataset& train, const Dataset& val,
                  const SubsetPartition& partition, const std::string& run_dir = "");

// Closed-set accuracy sweep used for per-epoch validation.
ReportFragment evaluate_closed_set(const Encoder& encoder, const PrototypeBank* bank,
                                   const Dataset& data, const SubsetPartition& partition,
                                   ProtoScore score_mode);

void write_history_csv(const TrainingHistory& history, const std::string& path);

} // namespace tailmix
