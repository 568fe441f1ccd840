#include "falign/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "falign/decode.hpp"
#include "falign/error.hpp"
#include "falign/fuzzy.hpp"
#include "falign/grad.hpp"
#include "falign/numeric.hpp"

namespace falign {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

void check_config(const TrainConfig& cfg) {
  if (cfg.lambda < 1.0) throw_error(ErrorKind::kInvalidConfig, "lambda must be >= 1");
  if (cfg.n < 1) throw_error(ErrorKind::kInvalidConfig, "n must be >= 1");
  if (cfg.pretrain_steps < 0 || cfg.finetune_steps < 0) {
    throw_error(ErrorKind::kInvalidConfig, "step counts must be non-negative");
  }
  if (cfg.learning_rate <= 0.0) throw_error(ErrorKind::kInvalidConfig, "learning rate must be > 0");
  if (cfg.warmup_steps < 0) throw_error(ErrorKind::kInvalidConfig, "warmup_steps must be >= 0");
  if (cfg.batch_size < 1) throw_error(ErrorKind::kInvalidConfig, "batch_size must be >= 1");
}

void check_corpus(const ToyCorpus& corpus) {
  if (corpus.samples.empty()) throw_error(ErrorKind::kInvalidConfig, "corpus is empty");
  if (corpus.vocab_size < 1) throw_error(ErrorKind::kInvalidConfig, "corpus vocab_size must be >= 1");
  for (const auto& [cls, ref] : corpus.samples) {
    if (cls < 0) throw_error(ErrorKind::kInvalidConfig, "negative class id");
    if (ref.length() < 2) {
      throw_error(ErrorKind::kInvalidConfig, "references must have at least two tokens");
    }
    for (int t : ref.tokens) {
      if (t < 0 || t >= corpus.vocab_size) {
        throw_error(ErrorKind::kInvalidConfig, "reference token outside the vocabulary");
      }
    }
  }
}

// Deterministic shuffled cyclic stream over sample indices.
class SampleStream {
 public:
  SampleStream(int count, std::uint64_t seed) : count_(count), rng_(seed) {
    order_.resize(count);
    for (int i = 0; i < count; ++i) order_[i] = i;
    reshuffle();
  }

  int next() {
    if (pos_ == count_) {
      reshuffle();
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    for (int i = count_ - 1; i > 0; --i) {
      int j = static_cast<int>(rng_() % static_cast<std::uint64_t>(i + 1));
      std::swap(order_[i], order_[j]);
    }
  }

  int count_;
  std::mt19937_64 rng_;
  std::vector<int> order_;
  int pos_ = 0;
};

struct AdamState {
  Mat m_trans, v_trans, m_emit, v_emit;
  int t = 0;

  explicit AdamState(const LatticeLogits& shape)
      : m_trans(shape.L, shape.L, 0.0),
        v_trans(shape.L, shape.L, 0.0),
        m_emit(shape.L, shape.vocab_size, 0.0),
        v_emit(shape.L, shape.vocab_size, 0.0) {}

  void step(LatticeLogits& params, const Mat& g_trans, const Mat& g_emit, double lr) {
    ++t;
    double c1 = 1.0 - std::pow(kAdamBeta1, t);
    double c2 = 1.0 - std::pow(kAdamBeta2, t);
    auto update = [&](Mat& theta, Mat& m, Mat& v, const Mat& g) {
      Vec& tv = theta.data();
      Vec& mv = m.data();
      Vec& vv = v.data();
      const Vec& gv = g.data();
      for (std::size_t i = 0; i < tv.size(); ++i) {
        mv[i] = kAdamBeta1 * mv[i] + (1.0 - kAdamBeta1) * gv[i];
        vv[i] = kAdamBeta2 * vv[i] + (1.0 - kAdamBeta2) * gv[i] * gv[i];
        tv[i] -= lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + kAdamEps);
      }
    };
    update(params.transition_logits, m_trans, v_trans, g_trans);
    update(params.emission_logits, m_emit, v_emit, g_emit);
  }
};

int argmax_token(const Lattice& lat, int v) {
  int best = 0;
  for (int t = 1; t < lat.vocab_size; ++t) {
    if (lat.emit(v, t) > lat.emit(v, best)) best = t;
  }
  return best;
}

}  // namespace

std::vector<Reference> ToyCorpus::references_for(int class_id) const {
  std::vector<Reference> refs;
  for (const auto& [cls, ref] : samples) {
    if (cls == class_id) refs.push_back(ref);
  }
  return refs;
}

ToyCorpus make_toy_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 1) throw_error(ErrorKind::kInvalidConfig, "num_classes must be >= 1");
  if (spec.ref_length < 2) throw_error(ErrorKind::kInvalidConfig, "ref_length must be >= 2");
  if (spec.vocab_size < 1) throw_error(ErrorKind::kInvalidConfig, "vocab_size must be >= 1");
  if (!spec.bases.empty() && static_cast<int>(spec.bases.size()) != spec.num_classes) {
    throw_error(ErrorKind::kInvalidConfig, "bases must provide one sequence per class");
  }
  const bool two_modality = spec.preset == CorpusSpec::Preset::kTwoModality;
  if (two_modality && spec.vocab_size < 2 && spec.bases.empty()) {
    throw_error(ErrorKind::kInvalidConfig,
                "two-modality preset needs vocab_size >= 2 to draw a non-palindromic base");
  }

  ToyCorpus corpus;
  corpus.num_classes = spec.num_classes;
  corpus.vocab_size = spec.vocab_size;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    std::vector<int> base;
    if (!spec.bases.empty()) {
      base = spec.bases[cls];
      if (static_cast<int>(base.size()) != spec.ref_length) {
        throw_error(ErrorKind::kInvalidConfig, "base length must equal ref_length");
      }
      for (int t : base) {
        if (t < 0 || t >= spec.vocab_size) {
          throw_error(ErrorKind::kInvalidConfig, "base token outside the vocabulary");
        }
      }
      if (two_modality && std::equal(base.begin(), base.end(), base.rbegin())) {
        // A palindromic base would collapse the two modalities into one.
        throw_error(ErrorKind::kInvalidConfig,
                    "two-modality base must differ from its own reversal");
      }
    } else {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
      auto draw = [&]() {
        base.resize(spec.ref_length);
        for (int& t : base) t = static_cast<int>(rng() % spec.vocab_size);
      };
      draw();
      if (two_modality) {
        // A palindromic base would collapse the two modalities into one.
        std::vector<int> rev(base.rbegin(), base.rend());
        while (rev == base) {
          draw();
          rev.assign(base.rbegin(), base.rend());
        }
      }
    }
    corpus.samples.push_back({cls, Reference{base}});
    if (two_modality) {
      corpus.samples.push_back({cls, Reference{{base.rbegin(), base.rend()}}});
    }
  }
  return corpus;
}

TrainResult train_full(const ToyCorpus& corpus, const TrainConfig& cfg) {
  check_config(cfg);
  check_corpus(corpus);

  TrainResult result;
  result.model.vocab_size = corpus.vocab_size;

  // Per-class lattice size: ceil(lambda * mean reference length), clamped so
  // the longest reference still fits with room for one extra vertex.
  std::vector<int> class_ids;
  for (const auto& [cls, ref] : corpus.samples) {
    if (std::find(class_ids.begin(), class_ids.end(), cls) == class_ids.end()) {
      class_ids.push_back(cls);
    }
  }
  std::sort(class_ids.begin(), class_ids.end());
  for (int cls : class_ids) {
    double mean_len = 0.0;
    int max_len = 0;
    int count = 0;
    for (const auto& [c, ref] : corpus.samples) {
      if (c != cls) continue;
      mean_len += ref.length();
      max_len = std::max(max_len, ref.length());
      ++count;
    }
    mean_len /= count;
    int L = std::max(static_cast<int>(std::ceil(cfg.lambda * mean_len)), max_len + 1);
    result.model.classes[cls] =
        random_lattice(mix_seed(cfg.seed, static_cast<std::uint64_t>(cls) + 1000), L,
                       corpus.vocab_size);
  }

  SampleStream stream(static_cast<int>(corpus.samples.size()), mix_seed(cfg.seed, 0));

  auto run_phase = [&](bool alignment_phase, int steps, std::vector<double>& losses) {
    std::map<int, AdamState> adam;
    for (auto& [cls, params] : result.model.classes) adam.emplace(cls, AdamState(params));

    for (int step = 1; step <= steps; ++step) {
      std::map<int, Mat> g_trans, g_emit;
      for (auto& [cls, params] : result.model.classes) {
        g_trans.emplace(cls, Mat(params.L, params.L, 0.0));
        g_emit.emplace(cls, Mat(params.L, params.vocab_size, 0.0));
      }
      double batch_loss = 0.0;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const auto& [cls, ref] = corpus.samples[stream.next()];
        const LatticeLogits& params = result.model.classes.at(cls);
        GradientBundle bundle = alignment_phase ? fa_loss_grad(params, ref, cfg.n)
                                                : nll_loss_grad(params, ref);
        batch_loss += bundle.loss_value;
        Vec& gt = g_trans.at(cls).data();
        Vec& ge = g_emit.at(cls).data();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += bundle.d_transition_logits.data()[i];
        for (std::size_t i = 0; i < ge.size(); ++i) ge[i] += bundle.d_emission_logits.data()[i];
      }
      losses.push_back(batch_loss / cfg.batch_size);

      double warm = cfg.warmup_steps > 0
                        ? std::min(1.0, static_cast<double>(step) / cfg.warmup_steps)
                        : 1.0;
      double lr = cfg.learning_rate * warm;
      for (auto& [cls, params] : result.model.classes) {
        Mat& gt = g_trans.at(cls);
        Mat& ge = g_emit.at(cls);
        for (double& x : gt.data()) x /= cfg.batch_size;
        for (double& x : ge.data()) x /= cfg.batch_size;
        adam.at(cls).step(params, gt, ge, lr);
      }
    }
  };

  run_phase(false, cfg.pretrain_steps, result.pretrain_loss);
  result.pretrained = result.model;
  run_phase(true, cfg.finetune_steps, result.finetune_loss);
  return result;
}

ToyModel train(const ToyCorpus& corpus, const TrainConfig& cfg) {
  return train_full(corpus, cfg).model;
}

double Report::exact_match_rate(const std::string& strategy) const {
  int hits = 0;
  int total = 0;
  for (const ClassReport& cr : classes) {
    for (const StrategyReport& sr : cr.strategies) {
      if (sr.strategy != strategy) continue;
      ++total;
      if (sr.exact_match) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

Report eval_report(const ToyModel& model, const ToyCorpus& corpus, const TrainConfig& cfg) {
  check_config(cfg);
  check_corpus(corpus);
  Report report;
  int cells = 0;
  for (const auto& [cls, params] : model.classes) {
    std::vector<Reference> refs = corpus.references_for(cls);
    if (refs.empty()) continue;
    Lattice lat = from_logits(params);

    ClassReport cr;
    cr.class_id = cls;

    struct Named {
      const char* name;
      Decode d;
    };
    std::vector<Named> decodes;
    decodes.push_back({"greedy", greedy_decode(lat)});
    decodes.push_back({"lookahead", lookahead_decode(lat)});
    decodes.push_back({"viterbi", joint_viterbi_decode(lat)});
    for (const Named& nd : decodes) {
      StrategyReport sr;
      sr.strategy = nd.name;
      sr.tokens = nd.d.tokens;
      sr.exact_match = std::any_of(refs.begin(), refs.end(), [&](const Reference& r) {
        return r.tokens == nd.d.tokens;
      });
      sr.neg_log_path = -nd.d.log_path_prob;
      sr.neg_log_tokens_given_path = -nd.d.log_tokens_given_path;
      sr.neg_log_marginal = -nd.d.log_marginal;
      report.mean_neg_log_path += sr.neg_log_path;
      report.mean_neg_log_tokens_given_path += sr.neg_log_tokens_given_path;
      report.mean_neg_log_marginal += sr.neg_log_marginal;
      ++cells;
      cr.strategies.push_back(std::move(sr));
    }

    for (const Reference& r : refs) cr.fa_loss += fa_loss(lat, r, cfg.n).loss;
    cr.fa_loss /= static_cast<double>(refs.size());

    PassingVector pv = passing_probabilities(lat);
    double conf = 0.0;
    int confident = 0;
    for (int v = 1; v <= lat.L; ++v) {
      double max_tok = lat.emit(v, argmax_token(lat, v));
      cr.vertex_stats.push_back({pv.at(v), max_tok});
      if (pv.at(v) > 0.5) {
        conf += max_tok;
        ++confident;
      }
    }
    cr.confidence = confident == 0 ? 0.0 : conf / confident;

    report.mean_confidence += cr.confidence;
    report.mean_fa_loss += cr.fa_loss;
    report.classes.push_back(std::move(cr));
  }
  if (cells > 0) {
    report.mean_neg_log_path /= cells;
    report.mean_neg_log_tokens_given_path /= cells;
    report.mean_neg_log_marginal /= cells;
  }
  if (!report.classes.empty()) {
    report.mean_confidence /= static_cast<double>(report.classes.size());
    report.mean_fa_loss /= static_cast<double>(report.classes.size());
  }
  return report;
}

SweepTable lambda_sweep(const ToyCorpus& corpus, const TrainConfig& cfg,
                        const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw_error(ErrorKind::kInvalidConfig, "lambda list is empty");
  SweepTable table;
  for (double lambda : lambdas) {
    TrainConfig base = cfg;
    base.lambda = lambda;

    // Equal total steps: the NLL-only run spends the finetune budget on more
    // likelihood steps.
    TrainConfig nll_cfg = base;
    nll_cfg.pretrain_steps = cfg.pretrain_steps + cfg.finetune_steps;
    nll_cfg.finetune_steps = 0;

    for (const char* objective : {"nll", "nll+fa"}) {
      const TrainConfig& run_cfg = std::string(objective) == "nll" ? nll_cfg : base;
      ToyModel model = train(corpus, run_cfg);
      Report report = eval_report(model, corpus, run_cfg);
      SweepTable::Row row;
      row.lambda = lambda;
      row.objective = objective;
      row.exact_match = report.exact_match_rate("lookahead");
      row.fa_score = -report.mean_fa_loss;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace falign
