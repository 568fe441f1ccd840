#include <doctest.h>

#include <cmath>
#include <vector>

#include "falign/train.hpp"
#include "fixtures.hpp"

using namespace falign;

namespace {

bool same_logits(const LatticeLogits& a, const LatticeLogits& b) {
  return a.L == b.L && a.vocab_size == b.vocab_size &&
         a.transition_logits.data() == b.transition_logits.data() &&
         a.emission_logits.data() == b.emission_logits.data();
}

bool same_model(const ToyModel& a, const ToyModel& b) {
  if (a.vocab_size != b.vocab_size || a.classes.size() != b.classes.size()) return false;
  for (const auto& [cls, params] : a.classes) {
    auto it = b.classes.find(cls);
    if (it == b.classes.end() || !same_logits(params, it->second)) return false;
  }
  return true;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.pretrain_steps = 300;
  cfg.finetune_steps = 150;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("corpus presets produce the documented samples") {
    CorpusSpec single;
    single.preset = CorpusSpec::Preset::kSingle;
    single.ref_length = 3;
    single.bases = {{0, 1, 2}};
    ToyCorpus sc = make_toy_corpus(single, 1);
    REQUIRE(sc.samples.size() == 1);
    CHECK(sc.samples[0].first == 0);
    CHECK(sc.samples[0].second.tokens == std::vector<int>{0, 1, 2});

    CorpusSpec both = single;
    both.preset = CorpusSpec::Preset::kTwoModality;
    ToyCorpus tc = make_toy_corpus(both, 1);
    REQUIRE(tc.samples.size() == 2);
    CHECK(tc.samples[0].second.tokens == std::vector<int>{0, 1, 2});
    CHECK(tc.samples[1].second.tokens == std::vector<int>{2, 1, 0});
    CHECK(tc.samples[1].first == 0);
    REQUIRE(tc.references_for(0).size() == 2);
  }

  TEST_CASE("random corpora are seed-deterministic and within bounds") {
    CorpusSpec spec;
    spec.preset = CorpusSpec::Preset::kTwoModality;
    spec.num_classes = 3;
    ToyCorpus a = make_toy_corpus(spec, 9);
    ToyCorpus b = make_toy_corpus(spec, 9);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(a.samples[i].first == b.samples[i].first);
      CHECK(a.samples[i].second.tokens == b.samples[i].second.tokens);
      CHECK(a.samples[i].second.length() >= 2);
      for (int t : a.samples[i].second.tokens) {
        CHECK(t >= 0);
        CHECK(t < spec.vocab_size);
      }
      // Two-modality bases are redrawn until they differ from their reversal.
      std::vector<int> reversed(a.samples[i].second.tokens.rbegin(),
                                a.samples[i].second.tokens.rend());
      CHECK(a.samples[i].second.tokens != reversed);
    }
  }

  TEST_CASE("corpus specs are validated") {
    CorpusSpec bad;
    bad.ref_length = 1;
    CHECK(testfix::thrown_kind([&] { make_toy_corpus(bad, 1); }) == ErrorKind::kInvalidConfig);
    CorpusSpec palindrome;
    palindrome.preset = CorpusSpec::Preset::kTwoModality;
    palindrome.ref_length = 3;
    palindrome.bases = {{0, 1, 0}};
    CHECK(testfix::thrown_kind([&] { make_toy_corpus(palindrome, 1); }) ==
          ErrorKind::kInvalidConfig);
  }

  TEST_CASE("training is bit-reproducible") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg = small_config();
    cfg.pretrain_steps = 60;
    cfg.finetune_steps = 20;
    TrainResult a = train_full(corpus, cfg);
    TrainResult b = train_full(corpus, cfg);
    CHECK(same_model(a.model, b.model));
    CHECK(same_model(a.pretrained, b.pretrained));
    CHECK(a.pretrain_loss == b.pretrain_loss);
    CHECK(a.finetune_loss == b.finetune_loss);
  }

  TEST_CASE("zero finetune steps return the pretrained parameters exactly") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg = small_config();
    cfg.pretrain_steps = 50;
    cfg.finetune_steps = 0;
    TrainResult res = train_full(corpus, cfg);
    CHECK(same_model(res.model, res.pretrained));
    CHECK(res.finetune_loss.empty());
    REQUIRE(res.pretrain_loss.size() == 50);
  }

  TEST_CASE("invalid configurations are rejected") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg;
    cfg.lambda = 0.5;
    CHECK(testfix::thrown_kind([&] { train(corpus, cfg); }) == ErrorKind::kInvalidConfig);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK(testfix::thrown_kind([&] { train(corpus, cfg); }) == ErrorKind::kInvalidConfig);
    cfg = TrainConfig{};
    cfg.learning_rate = 0.0;
    CHECK(testfix::thrown_kind([&] { train(corpus, cfg); }) == ErrorKind::kInvalidConfig);
    ToyCorpus empty;
    empty.vocab_size = 4;
    CHECK(testfix::thrown_kind([&] { train(empty, TrainConfig{}); }) ==
          ErrorKind::kInvalidConfig);
    ToyCorpus short_ref;
    short_ref.num_classes = 1;
    short_ref.vocab_size = 4;
    short_ref.samples = {{0, Reference{{1}}}};
    CHECK(testfix::thrown_kind([&] { train(short_ref, TrainConfig{}); }) ==
          ErrorKind::kInvalidConfig);
  }

  TEST_CASE("losses and parameters stay finite throughout training") {
    CorpusSpec spec;
    spec.preset = CorpusSpec::Preset::kTwoModality;
    ToyCorpus corpus = make_toy_corpus(spec, 4);
    TrainConfig cfg;
    cfg.pretrain_steps = 80;
    cfg.finetune_steps = 40;
    TrainResult res = train_full(corpus, cfg);
    for (double loss : res.pretrain_loss) CHECK(std::isfinite(loss));
    for (double loss : res.finetune_loss) CHECK(std::isfinite(loss));
    for (const auto& [cls, params] : res.model.classes) {
      CHECK(params.transition_logits.all_finite());
      CHECK(params.emission_logits.all_finite());
    }
  }

  TEST_CASE("alignment finetuning converges and does not backslide") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg = small_config();
    TrainResult res = train_full(corpus, cfg);
    REQUIRE(res.finetune_loss.size() == 150);
    CHECK(res.finetune_loss.back() <= res.finetune_loss.front() + 1e-6);
    CHECK(res.finetune_loss.back() <= -0.99);

    Report rep = eval_report(res.model, corpus, cfg);
    CHECK(rep.exact_match_rate("lookahead") == 1.0);
    CHECK(rep.exact_match_rate("greedy") == 1.0);
    CHECK(rep.exact_match_rate("viterbi") == 1.0);
    CHECK(rep.mean_confidence >= 0.99);
    CHECK(rep.mean_fa_loss <= -0.99);
    CHECK(rep.mean_neg_log_tokens_given_path <= 0.01);

    // The report is a pure function of its inputs.
    Report again = eval_report(res.model, corpus, cfg);
    CHECK(again.mean_confidence == rep.mean_confidence);
    CHECK(again.mean_fa_loss == rep.mean_fa_loss);
    CHECK(again.mean_neg_log_marginal == rep.mean_neg_log_marginal);
  }

  TEST_CASE("an untrained model scores poorly") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg;
    ToyModel model;
    model.vocab_size = corpus.vocab_size;
    model.classes[0] = random_lattice(11, 20, corpus.vocab_size);
    Report rep = eval_report(model, corpus, cfg);
    CHECK(rep.exact_match_rate("lookahead") == 0.0);
    CHECK(rep.mean_confidence < 0.9);
  }

  TEST_CASE("per-class report carries the vertex scatter") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg = small_config();
    cfg.pretrain_steps = 40;
    cfg.finetune_steps = 0;
    TrainResult res = train_full(corpus, cfg);
    Report rep = eval_report(res.model, corpus, cfg);
    REQUIRE(rep.classes.size() == 1);
    const ClassReport& cls = rep.classes[0];
    CHECK(cls.class_id == 0);
    REQUIRE(cls.strategies.size() == 3);
    // L = ceil(lambda * mean reference length) = 20 for the default preset.
    CHECK(cls.vertex_stats.size() == 20);
    CHECK(cls.vertex_stats.front().first == 1.0);
    for (const auto& [p, q] : cls.vertex_stats) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0 + 1e-12);
      CHECK(q >= 0.0);
      CHECK(q <= 1.0 + 1e-12);
    }
  }

  TEST_CASE("the lambda sweep reports both objectives per lattice size") {
    CorpusSpec spec;
    ToyCorpus corpus = make_toy_corpus(spec, 1);
    TrainConfig cfg = small_config();
    std::vector<double> lambdas = {2.0, 4.0};
    SweepTable table = lambda_sweep(corpus, cfg, lambdas);
    REQUIRE(table.rows.size() == 4);
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      const auto& nll_row = table.rows[2 * i];
      const auto& fa_row = table.rows[2 * i + 1];
      CHECK(nll_row.lambda == lambdas[i]);
      CHECK(fa_row.lambda == lambdas[i]);
      CHECK(nll_row.objective == "nll");
      CHECK(fa_row.objective == "nll+fa");
      // Finetuning on the alignment objective must not lose alignment score
      // relative to likelihood-only training at the same total step count.
      CHECK(fa_row.fa_score >= nll_row.fa_score - 1e-6);
      CHECK(fa_row.exact_match == 1.0);
    }

    SweepTable again = lambda_sweep(corpus, cfg, lambdas);
    REQUIRE(again.rows.size() == table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      CHECK(again.rows[i].fa_score == table.rows[i].fa_score);
      CHECK(again.rows[i].exact_match == table.rows[i].exact_match);
    }
  }
}
