// Command-line surface. Exit codes: 0 success, 1 validation/infeasibility
// failures (including failed checks), 2 I/O, format, or usage errors.
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "falign/decode.hpp"
#include "falign/error.hpp"
#include "falign/fuzzy.hpp"
#include "falign/grad.hpp"
#include "falign/io.hpp"
#include "falign/lattice.hpp"
#include "falign/oracle.hpp"
#include "falign/pathdp.hpp"
#include "falign/train.hpp"

namespace {

using namespace falign;

constexpr int kStdoutDigits = 12;
constexpr double kOracleTol = 1e-9;

// JSON number with stdout precision; non-finite values become strings since
// bare inf/nan are not valid JSON.
std::string jnum(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  return format_double(v, kStdoutDigits);
}

std::string jints(const std::vector<int>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(xs[i]);
  }
  return out + "]";
}

Reference load_reference(const std::string& ref, const std::string& ref_file) {
  if (!ref.empty()) return parse_reference(ref);
  if (ref_file.empty()) throw_error(ErrorKind::kFormat, "pass --ref or --ref-file");
  std::ifstream in(ref_file);
  if (!in) throw_error(ErrorKind::kIo, "cannot open " + ref_file);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_reference(buf.str());
}

std::filesystem::path vertices_sibling(const std::filesystem::path& csv) {
  std::filesystem::path out = csv;
  out.replace_extension(".vertices.csv");
  return out;
}

std::string coord_name(const CheckCoord& c) {
  const char* kind = c.is_emission ? "emission" : "transition";
  return std::string(kind) + "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

int run_score(const std::string& lattice_file, const Reference& y, int n) {
  Lattice lat = from_logits(read_lattice_file(lattice_file));
  AlignmentReport rep = fa_loss(lat, y, n);
  std::cout << "{\"order\":" << rep.order << ",\"numerator\":" << jnum(rep.numerator)
            << ",\"denominator\":" << jnum(rep.denominator)
            << ",\"precision\":" << jnum(rep.precision)
            << ",\"expected_length\":" << jnum(rep.expected_length) << ",\"bp\":" << jnum(rep.bp)
            << ",\"loss\":" << jnum(rep.loss) << "}\n";
  return 0;
}

int run_nll(const std::string& lattice_file, const Reference& y) {
  Lattice lat = from_logits(read_lattice_file(lattice_file));
  double value = marginal_nll(lat, y);
  std::cout << "{\"nll\":" << jnum(value) << "}\n";
  return 0;
}

int run_decode(const std::string& lattice_file, const std::string& strategy,
               const std::string& stats_out) {
  Lattice lat = from_logits(read_lattice_file(lattice_file));
  Decode d;
  if (strategy == "greedy") {
    d = greedy_decode(lat);
  } else if (strategy == "lookahead") {
    d = lookahead_decode(lat);
  } else {
    d = joint_viterbi_decode(lat);
  }
  std::cout << "{\"strategy\":\"" << strategy << "\",\"tokens\":" << jints(d.tokens)
            << ",\"path\":" << jints(d.path.vertices)
            << ",\"log_path_prob\":" << jnum(d.log_path_prob)
            << ",\"log_tokens_given_path\":" << jnum(d.log_tokens_given_path)
            << ",\"log_marginal\":" << jnum(d.log_marginal) << "}\n";
  if (!stats_out.empty()) {
    write_decode_stats(decode_stats(lat, d), stats_out, vertices_sibling(stats_out));
  }
  return 0;
}

int run_oracle_check(const std::string& lattice_file, int n, const std::string& ref,
                     const std::string& ref_file) {
  Lattice lat = from_logits(read_lattice_file(lattice_file));
  bool all_pass = true;
  auto row = [&](const char* name, double dev) {
    bool ok = dev <= kOracleTol;
    all_pass = all_pass && ok;
    std::cout << name << " max_abs_dev " << format_double(dev, 3) << (ok ? " PASS" : " FAIL")
              << "\n";
  };

  PassingVector eff = passing_probabilities(lat);
  PassingVector orc = oracle_passing_prob(lat);
  double dev = 0.0;
  for (int v = 1; v <= lat.L; ++v) dev = std::max(dev, std::abs(eff.at(v) - orc.at(v)));
  row("passing_prob", dev);

  double gram_space = std::pow(static_cast<double>(lat.vocab_size), n);
  if (gram_space > 4096.0) {
    throw_error(ErrorKind::kCapExceeded,
                "gram space vocab_size^n = " + format_double(gram_space, 6) +
                    " exceeds the oracle-check cap of 4096");
  }
  dev = 0.0;
  Gram gram(n, 0);
  for (;;) {
    dev = std::max(dev,
                   std::abs(expected_gram_count(lat, gram) - oracle_expected_gram_count(lat, gram)));
    int k = n - 1;
    while (k >= 0 && gram[k] == lat.vocab_size - 1) gram[k--] = 0;
    if (k < 0) break;
    ++gram[k];
  }
  row("expected_gram_count", dev);

  PathEnumeration en = enumerate_paths(lat);
  double oracle_total = 0.0;
  for (const auto& [path, prob] : en.paths) {
    oracle_total += prob * std::max(path.length() - n + 1, 0);
  }
  row("expected_total_ngrams", std::abs(expected_total_ngrams(lat, n) - oracle_total));

  if (!ref.empty() || !ref_file.empty()) {
    Reference y = load_reference(ref, ref_file);
    double eff_marg = std::exp(-marginal_nll(lat, y));
    row("marginal_prob", std::abs(eff_marg - oracle_marginal_prob(lat, y)));
  }

  Decode fast = joint_viterbi_decode(lat);
  Decode slow = oracle_best_joint(lat);
  bool same = fast.path == slow.path && fast.tokens == slow.tokens;
  double norm_fast =
      (fast.log_path_prob + fast.log_tokens_given_path) / static_cast<double>(fast.tokens.size());
  double norm_slow =
      (slow.log_path_prob + slow.log_tokens_given_path) / static_cast<double>(slow.tokens.size());
  bool vit_ok = same && std::abs(norm_fast - norm_slow) <= kOracleTol;
  all_pass = all_pass && vit_ok;
  std::cout << "viterbi match " << (same ? 1 : 0) << " score_dev "
            << format_double(std::abs(norm_fast - norm_slow), 3) << (vit_ok ? " PASS" : " FAIL")
            << "\n";

  std::cout << (all_pass ? "overall PASS" : "overall FAIL") << "\n";
  return all_pass ? 0 : 1;
}

int run_gradcheck(const std::string& lattice_file, const Reference& y, int n,
                  const std::string& loss) {
  LatticeLogits params = read_lattice_file(lattice_file);
  LossKind kind = loss == "fa" ? LossKind::kFuzzyAlignment : LossKind::kNll;
  CheckReport rep = finite_diff_check(params, y, n, kind);
  std::cout << "loss " << loss << " order " << n << "\n";
  std::cout << "checked " << rep.checked << " skipped " << rep.skipped.size() << "\n";
  if (!rep.skipped.empty()) {
    std::cout << "skipped_coords";
    for (const CheckCoord& c : rep.skipped) std::cout << " " << coord_name(c);
    std::cout << "\n";
  }
  std::cout << "max_rel_err " << format_double(rep.max_rel_err, 6) << " at "
            << coord_name(rep.worst) << " analytic " << format_double(rep.worst_analytic, 6)
            << " numeric " << format_double(rep.worst_numeric, 6) << "\n";
  std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
  return rep.pass ? 0 : 1;
}

int run_train(const std::string& corpus_file, const std::string& config_file,
              const std::string& model_out, const std::string& report_out, bool quiet,
              bool seed_given, std::uint64_t seed) {
  ToyCorpus corpus = read_corpus_file(corpus_file);
  TrainConfig cfg = read_config_file(config_file);
  if (seed_given) cfg.seed = seed;
  TrainResult res = train_full(corpus, cfg);
  write_model_file(model_out, res.model);
  Report rep = eval_report(res.model, corpus, cfg);
  write_report_csv(rep, report_out, vertices_sibling(report_out));
  if (!quiet) {
    std::cout << "train ok classes=" << corpus.num_classes;
    if (!res.pretrain_loss.empty()) {
      std::cout << " pretrain_final=" << format_double(res.pretrain_loss.back(), kStdoutDigits);
    }
    if (!res.finetune_loss.empty()) {
      std::cout << " finetune_final=" << format_double(res.finetune_loss.back(), kStdoutDigits);
    }
    std::cout << " lookahead_exact_match="
              << format_double(rep.exact_match_rate("lookahead"), kStdoutDigits)
              << " mean_confidence=" << format_double(rep.mean_confidence, kStdoutDigits) << "\n";
  }
  return 0;
}

int run_sweep(const std::string& corpus_file, const std::string& config_file,
              const std::vector<double>& lambdas, const std::string& out, bool quiet,
              bool seed_given, std::uint64_t seed) {
  ToyCorpus corpus = read_corpus_file(corpus_file);
  TrainConfig cfg = read_config_file(config_file);
  if (seed_given) cfg.seed = seed;
  SweepTable table = lambda_sweep(corpus, cfg, lambdas);
  write_sweep_csv(table, out);
  if (!quiet) {
    for (const SweepTable::Row& r : table.rows) {
      std::cout << "lambda=" << format_double(r.lambda, 6) << " objective=" << r.objective
                << " exact_match=" << format_double(r.exact_match, 6)
                << " fa_score=" << format_double(r.fa_score, kStdoutDigits) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoding-lattice toolkit: scoring, decoding, gradient checks, toy training"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  bool quiet = false;
  app.add_option("--seed", seed, "Override the seed used by seeded subcommands");
  app.add_flag("--quiet", quiet, "Suppress summary output (files are still written)");

  std::string score_lattice, score_ref, score_ref_file;
  int score_n = 2;
  CLI::App* score = app.add_subcommand("score", "Alignment objective of a lattice vs a reference");
  score->add_option("lattice-file", score_lattice, "Lattice logits JSON")->required();
  score->add_option("--ref", score_ref, "Reference as comma-separated token ids");
  score->add_option("--ref-file", score_ref_file, "File holding the comma-separated reference");
  score->add_option("--n", score_n, "n-gram order")->default_val(2);

  std::string nll_lattice, nll_ref, nll_ref_file;
  CLI::App* nll = app.add_subcommand("nll", "Exact -log P(y|x) by dynamic programming");
  nll->add_option("lattice-file", nll_lattice, "Lattice logits JSON")->required();
  nll->add_option("--ref", nll_ref, "Reference as comma-separated token ids");
  nll->add_option("--ref-file", nll_ref_file, "File holding the comma-separated reference");

  std::string dec_lattice, dec_strategy, dec_stats_out;
  CLI::App* dec = app.add_subcommand("decode", "Decode a lattice");
  dec->add_option("lattice-file", dec_lattice, "Lattice logits JSON")->required();
  dec->add_option("--strategy", dec_strategy, "greedy | lookahead | viterbi")
      ->required()
      ->check(CLI::IsMember({"greedy", "lookahead", "viterbi"}));
  dec->add_option("--stats-out", dec_stats_out,
                  "Write score CSV here and per-vertex stats to the .vertices.csv sibling");

  std::string oc_lattice, oc_ref, oc_ref_file;
  int oc_n = 2;
  CLI::App* oc = app.add_subcommand("oracle-check",
                                    "Compare the recurrences against brute-force enumeration");
  oc->add_option("lattice-file", oc_lattice, "Lattice logits JSON")->required();
  oc->add_option("--n", oc_n, "n-gram order")->default_val(2);
  oc->add_option("--ref", oc_ref, "Optional reference for the marginal comparison");
  oc->add_option("--ref-file", oc_ref_file, "File holding the comma-separated reference");

  std::string gc_lattice, gc_ref, gc_ref_file, gc_loss;
  int gc_n = 2;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of a loss gradient");
  gc->add_option("lattice-file", gc_lattice, "Lattice logits JSON")->required();
  gc->add_option("--ref", gc_ref, "Reference as comma-separated token ids");
  gc->add_option("--ref-file", gc_ref_file, "File holding the comma-separated reference");
  gc->add_option("--n", gc_n, "n-gram order (fa loss only)")->default_val(2);
  gc->add_option("--loss", gc_loss, "fa | nll")
      ->required()
      ->check(CLI::IsMember({"fa", "nll"}));

  std::string tr_corpus, tr_config, tr_model_out, tr_report_out;
  CLI::App* tr = app.add_subcommand("train", "Two-phase toy training on a corpus");
  tr->add_option("corpus-file", tr_corpus, "JSON-lines corpus")->required();
  tr->add_option("config-file", tr_config, "Training config JSON")->required();
  tr->add_option("--model-out", tr_model_out, "Trained model JSON path")->required();
  tr->add_option("--report-out", tr_report_out,
                 "Evaluation CSV path; per-vertex stats go to the .vertices.csv sibling")
      ->required();

  std::string sw_corpus, sw_config, sw_out;
  std::vector<double> sw_lambdas{2.0, 4.0, 6.0, 8.0};
  CLI::App* sw = app.add_subcommand("sweep", "Train per lattice-size factor, both objectives");
  sw->add_option("corpus-file", sw_corpus, "JSON-lines corpus")->required();
  sw->add_option("config-file", sw_config, "Training config JSON")->required();
  sw->add_option("--lambdas", sw_lambdas, "Lattice-size factors")
      ->delimiter(',')
      ->default_str("2,4,6,8");
  sw->add_option("--out", sw_out, "Sweep CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (score->parsed()) {
      return run_score(score_lattice, load_reference(score_ref, score_ref_file), score_n);
    }
    if (nll->parsed()) {
      return run_nll(nll_lattice, load_reference(nll_ref, nll_ref_file));
    }
    if (dec->parsed()) {
      return run_decode(dec_lattice, dec_strategy, dec_stats_out);
    }
    if (oc->parsed()) {
      return run_oracle_check(oc_lattice, oc_n, oc_ref, oc_ref_file);
    }
    if (gc->parsed()) {
      return run_gradcheck(gc_lattice, load_reference(gc_ref, gc_ref_file), gc_n, gc_loss);
    }
    if (tr->parsed()) {
      return run_train(tr_corpus, tr_config, tr_model_out, tr_report_out, quiet,
                       app.count("--seed") > 0, seed);
    }
    if (sw->parsed()) {
      return run_sweep(sw_corpus, sw_config, sw_lambdas, sw_out, quiet,
                       app.count("--seed") > 0, seed);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (e.kind() == ErrorKind::kIo || e.kind() == ErrorKind::kFormat) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
