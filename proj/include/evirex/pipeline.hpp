#pragma once

#include <iosfwd>
#include <optional>

#include "evirex/evidence.hpp"
#include "evirex/metrics.hpp"
#include "evirex/model.hpp"
#include "evirex/prediction.hpp"

namespace evirex {

enum class ReLossKind { atl, bce };
enum class ErSupervision { gold, silver, none };

const char* to_string(ReLossKind k);
const char* to_string(ErSupervision s);
ReLossKind re_loss_from_string(const std::string& s);
ErSupervision er_supervision_from_string(const std::string& s);

struct TrainConfig {
    std::size_t epochs = 30;
    double lr_encoder = 3e-3;
    double lr_classifier = 6e-3;
    double lambda = 0.1;
    std::size_t batch_size = 4; // documents per optimizer step
    double grad_clip = 1.0;
    double warmup_fraction = 0.06;
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    ReLossKind re_loss = ReLossKind::atl;
    ErSupervision er_supervision = ErSupervision::gold;
    bool select_best_dev = true; // otherwise the final epoch's parameters
    double evi_threshold = 0.2;  // for per-epoch dev evaluation

    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double loss_re = 0.0;
    double loss_er = 0.0;
    double loss_total = 0.0;
    double dev_re_f1 = -1.0;
    double dev_evi_f1 = -1.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
    std::size_t skipped_docs = 0;  // documents over the encoder max length
    std::size_t selected_epoch = 0; // 0 = initial parameters
};

// Per-document training loss, shared between the train loop and the gradient
// tests. RE averages over every ordered pair; ER averages over contributing
// pairs only (gold: pairs with a usable evidence marginal; silver: all).
struct DocLossOptions {
    ReLossKind re_loss = ReLossKind::atl;
    ErSupervision er_supervision = ErSupervision::gold;
    double lambda = 0.1;
    const SilverEvidenceStore* silver = nullptr;
};

struct DocLoss {
    num::Var total;
    num::Var re;
    std::optional<num::Var> er; // absent when no pair contributes
    std::size_t er_pairs = 0;
};

DocLoss build_doc_loss(num::Tape& tape, const num::ParamLeaves& leaves, const Document& doc,
                       const TokenizedDocument& tok, const ModelConfig& cfg,
                       const DocLossOptions& opts);

// AdamW with linear warmup and gradient-norm clipping. `init` continues from
// a checkpoint (its vocabulary is reused); otherwise parameters are fresh
// from cfg.seed and the vocabulary is built from the training corpus.
TrainResult train(const Corpus& train_corpus, const Corpus* dev_corpus,
                  const RelationSchema& schema, const ModelConfig& mcfg, const TrainConfig& cfg,
                  const Model* init = nullptr, const SilverEvidenceStore* silver = nullptr,
                  std::ostream* log_stream = nullptr);

// Teacher inference over every ordered pair of every document; documents over
// the max length are skipped with a warning record in the store.
SilverEvidenceStore distill(const Model& teacher, const Corpus& distant);

// Adaptive-threshold relation prediction plus static-threshold evidence.
std::vector<Prediction> predict(const Model& model, const Corpus& corpus,
                                double evi_threshold = 0.2);

struct FusionConfig {
    double tau = 0.0;
};

struct FuseResult {
    FusionConfig config;
    std::vector<Prediction> fused;
    // per input candidate: fused score and whether the triple is dev-gold
    std::vector<std::pair<double, bool>> scored;
    double bce_at_tau = 0.0;
    double bce_at_neg_inf = 0.0;
    double bce_at_pos_inf = 0.0;
};

// The blending objective: mean binary cross-entropy of sigmoid(score - tau)
// against the is-gold flags, probabilities clamped away from 0 and 1.
double fusion_bce(const std::vector<std::pair<double, bool>>& scored, double tau);

// Inference-stage fusion: each predicted triple is re-scored on a
// pseudo-document built from its evidence sentences; tau is grid-searched
// (201 points over the observed fused-score range) to minimize dev BCE of
// "triple is gold". Predictions must refer to dev_corpus documents.
FuseResult fuse(const Model& model, const std::vector<Prediction>& predictions,
                const Corpus& dev_corpus);

struct SelfTrainingResult {
    Model teacher;
    Model student;
    std::vector<EpochLog> teacher_log, student_log, finetune_log;
    SilverEvidenceStore store;
};

// teacher on human data -> silver distillation on distant data -> student on
// distant data -> finetune on human data. An empty distant corpus collapses
// to teacher + a finetune-only student.
SelfTrainingResult run_self_training(const Corpus& human_train, const Corpus& human_dev,
                                     const Corpus& distant, const RelationSchema& schema,
                                     const ModelConfig& mcfg, const TrainConfig& cfg_teacher,
                                     const TrainConfig& cfg_student,
                                     const TrainConfig& cfg_finetune,
                                     std::ostream* log_stream = nullptr);

// Plain-text per-token importance dump for one document and entity pair.
std::string inspect_attention(const Model& model, const Corpus& corpus,
                              const std::string& doc_id, int subject, int object,
                              double evi_threshold = 0.2);

} // namespace evirex
