#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "falign/lattice.hpp"
#include "falign/pathdp.hpp"

namespace falign {

// Tabular toy task: each class id owns one lattice; the corpus pairs class
// ids with reference token sequences. The two-modality preset gives every
// class two references, a sequence and its reversal, which makes the corpus
// deliberately multi-modal.
struct CorpusSpec {
  enum class Preset { kSingle, kTwoModality };
  Preset preset = Preset::kSingle;
  int num_classes = 1;
  int ref_length = 5;
  int vocab_size = 4;
  // Optional explicit base sequences, one per class; when empty, bases are
  // drawn uniformly from the seed (redrawn if a two-modality base equals its
  // own reversal).
  std::vector<std::vector<int>> bases;
};

struct ToyCorpus {
  int num_classes = 0;
  int vocab_size = 0;
  std::vector<std::pair<int, Reference>> samples;  // (class id, reference)

  std::vector<Reference> references_for(int class_id) const;
};

struct TrainConfig {
  double lambda = 4.0;        // lattice size factor: L = ceil(lambda * mean ref length)
  int n = 2;                  // n-gram order of the alignment loss
  int pretrain_steps = 2000;  // likelihood phase
  int finetune_steps = 500;   // alignment phase
  double learning_rate = 0.1;
  int warmup_steps = 100;     // linear warmup, restarted at each phase
  int batch_size = 8;
  std::uint64_t seed = 1;
};

struct ToyModel {
  int vocab_size = 0;
  std::map<int, LatticeLogits> classes;
};

ToyCorpus make_toy_corpus(const CorpusSpec& spec, std::uint64_t seed);

// Two-phase optimization: likelihood pretraining then alignment finetuning,
// both with Adam (beta1 0.9, beta2 0.999, eps 1e-8) and per-phase linear
// warmup. Per-class L = ceil(lambda * mean reference length), clamped to at
// least the longest reference + 1 so every reference stays feasible.
// Deterministic: the same corpus, config, and seed reproduce the parameter
// trajectory bit for bit.
struct TrainResult {
  ToyModel model;            // after both phases
  ToyModel pretrained;       // snapshot at the end of the likelihood phase
  std::vector<double> pretrain_loss;  // mean batch loss per step
  std::vector<double> finetune_loss;
};

TrainResult train_full(const ToyCorpus& corpus, const TrainConfig& cfg);

// train_full(...).model.
ToyModel train(const ToyCorpus& corpus, const TrainConfig& cfg);

struct StrategyReport {
  std::string strategy;  // "greedy" | "lookahead" | "viterbi"
  std::vector<int> tokens;
  bool exact_match = false;  // decoded tokens equal one of the class's references
  double neg_log_path = 0.0;
  double neg_log_tokens_given_path = 0.0;
  double neg_log_marginal = 0.0;
};

struct ClassReport {
  int class_id = 0;
  std::vector<StrategyReport> strategies;
  double fa_loss = 0.0;     // mean alignment loss over the class's references
  double confidence = 0.0;  // mean max-token-prob over vertices with passing prob > 0.5
  std::vector<std::pair<double, double>> vertex_stats;  // (passing prob, max token prob)
};

struct Report {
  std::vector<ClassReport> classes;
  // Aggregates over all (class, strategy) cells resp. classes.
  double mean_neg_log_path = 0.0;
  double mean_neg_log_tokens_given_path = 0.0;
  double mean_neg_log_marginal = 0.0;
  double mean_confidence = 0.0;
  double mean_fa_loss = 0.0;

  double exact_match_rate(const std::string& strategy) const;
};

Report eval_report(const ToyModel& model, const ToyCorpus& corpus, const TrainConfig& cfg);

// One NLL-only and one NLL->FA model per lambda, at equal total step counts.
struct SweepTable {
  struct Row {
    double lambda = 0.0;
    std::string objective;    // "nll" | "nll+fa"
    double exact_match = 0.0; // lookahead exact-match rate
    double fa_score = 0.0;    // mean bp * precision (higher is better)
  };
  std::vector<Row> rows;
};

SweepTable lambda_sweep(const ToyCorpus& corpus, const TrainConfig& cfg,
                        const std::vector<double>& lambdas);

}  // namespace falign
