#include "falign/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "falign/error.hpp"

namespace falign {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::kIo, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw_error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return j;
}

Mat parse_matrix(const json& j, const std::string& key, int rows, int cols) {
  if (!j.contains(key) || !j[key].is_array() || static_cast<int>(j[key].size()) != rows) {
    throw_error(ErrorKind::kFormat, key + " must be an array of " + std::to_string(rows) + " rows");
  }
  Mat out(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[key][r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw_error(ErrorKind::kFormat,
                  key + " row " + std::to_string(r) + " must have " + std::to_string(cols) +
                      " entries");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw_error(ErrorKind::kFormat, key + " entries must be numbers");
      out(r, c) = row[c].get<double>();
    }
  }
  return out;
}

LatticeLogits parse_lattice_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw_error(ErrorKind::kFormat, where + " must be an object");
  if (!j.contains("L") || !j["L"].is_number_integer() || !j.contains("vocab_size") ||
      !j["vocab_size"].is_number_integer()) {
    throw_error(ErrorKind::kFormat, where + " needs integer L and vocab_size");
  }
  LatticeLogits params;
  params.L = j["L"].get<int>();
  params.vocab_size = j["vocab_size"].get<int>();
  if (params.L < 1 || params.vocab_size < 1) {
    throw_error(ErrorKind::kFormat, where + ": L and vocab_size must be positive");
  }
  params.transition_logits = parse_matrix(j, "transition_logits", params.L, params.L);
  params.emission_logits = parse_matrix(j, "emission_logits", params.L, params.vocab_size);
  return params;
}

void append_matrix(std::string& out, const Mat& m) {
  out += '[';
  for (int r = 0; r < m.rows(); ++r) {
    if (r > 0) out += ',';
    out += '[';
    for (int c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(m(r, c), 17);
    }
    out += ']';
  }
  out += ']';
}

std::string lattice_object_text(const LatticeLogits& params) {
  std::string out;
  out += "{\"L\":" + std::to_string(params.L);
  out += ",\"vocab_size\":" + std::to_string(params.vocab_size);
  out += ",\"transition_logits\":";
  append_matrix(out, params.transition_logits);
  out += ",\"emission_logits\":";
  append_matrix(out, params.emission_logits);
  out += '}';
  return out;
}

}  // namespace

std::string format_double(double value, int sig_digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, value);
  return buf;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw_error(ErrorKind::kIo, "cannot write " + tmp.string());
    out << content;
    if (!out) throw_error(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw_error(ErrorKind::kIo, "cannot rename " + tmp.string() + " to " + path.string());
}

LatticeLogits read_lattice_file(const std::filesystem::path& path) {
  return parse_lattice_object(parse_file(path), path.string());
}

void write_lattice_file(const std::filesystem::path& path, const LatticeLogits& params) {
  atomic_write_text(path, lattice_object_text(params) + "\n");
}

ToyModel read_model_file(const std::filesystem::path& path) {
  json j = parse_file(path);
  if (!j.is_object() || !j.contains("vocab_size") || !j["vocab_size"].is_number_integer() ||
      !j.contains("classes") || !j["classes"].is_object()) {
    throw_error(ErrorKind::kFormat, path.string() + ": model needs vocab_size and classes");
  }
  ToyModel model;
  model.vocab_size = j["vocab_size"].get<int>();
  for (const auto& [key, value] : j["classes"].items()) {
    int cls = 0;
    try {
      cls = std::stoi(key);
    } catch (const std::exception&) {
      throw_error(ErrorKind::kFormat, path.string() + ": class key must be an integer");
    }
    LatticeLogits params = parse_lattice_object(value, path.string() + " class " + key);
    if (params.vocab_size != model.vocab_size) {
      throw_error(ErrorKind::kFormat, path.string() + ": class vocab_size mismatch");
    }
    model.classes[cls] = std::move(params);
  }
  return model;
}

void write_model_file(const std::filesystem::path& path, const ToyModel& model) {
  std::string out;
  out += "{\"vocab_size\":" + std::to_string(model.vocab_size);
  out += ",\"classes\":{";
  bool first = true;
  for (const auto& [cls, params] : model.classes) {
    if (!first) out += ',';
    first = false;
    out += '"' + std::to_string(cls) + "\":";
    out += lattice_object_text(params);
  }
  out += "}}\n";
  atomic_write_text(path, out);
}

ToyCorpus read_corpus_file(const std::filesystem::path& path, int vocab_size_override) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::kIo, "cannot open " + path.string());
  ToyCorpus corpus;
  int max_token = -1;
  int max_class = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw_error(ErrorKind::kFormat,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("class") || !j["class"].is_number_integer() ||
        !j.contains("reference") || !j["reference"].is_array()) {
      throw_error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": expected {\"class\": int, \"reference\": [int...]}");
    }
    int cls = j["class"].get<int>();
    if (cls < 0) {
      throw_error(ErrorKind::kFormat,
                  path.string() + ":" + std::to_string(line_no) + ": class must be >= 0");
    }
    Reference ref;
    for (const json& t : j["reference"]) {
      if (!t.is_number_integer() || t.get<int>() < 0) {
        throw_error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                            ": reference tokens must be non-negative integers");
      }
      ref.tokens.push_back(t.get<int>());
      max_token = std::max(max_token, t.get<int>());
    }
    max_class = std::max(max_class, cls);
    corpus.samples.push_back({cls, std::move(ref)});
  }
  if (corpus.samples.empty()) throw_error(ErrorKind::kFormat, path.string() + ": empty corpus");
  corpus.num_classes = max_class + 1;
  corpus.vocab_size = std::max(max_token + 1, vocab_size_override);
  return corpus;
}

void write_corpus_file(const std::filesystem::path& path, const ToyCorpus& corpus) {
  std::string out;
  for (const auto& [cls, ref] : corpus.samples) {
    out += "{\"class\":" + std::to_string(cls) + ",\"reference\":[";
    for (int i = 0; i < ref.length(); ++i) {
      if (i > 0) out += ',';
      out += std::to_string(ref.tokens[i]);
    }
    out += "]}\n";
  }
  atomic_write_text(path, out);
}

TrainConfig read_config_file(const std::filesystem::path& path) {
  json j = parse_file(path);
  if (!j.is_object()) throw_error(ErrorKind::kFormat, path.string() + ": config must be an object");
  TrainConfig cfg;
  auto number = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw_error(ErrorKind::kFormat, std::string(key) + " must be a number");
    return j[key].get<double>();
  };
  auto integer = [&](const char* key, long long fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) {
      throw_error(ErrorKind::kFormat, std::string(key) + " must be an integer");
    }
    return j[key].get<long long>();
  };
  cfg.lambda = number("lambda", cfg.lambda);
  cfg.n = static_cast<int>(integer("n", cfg.n));
  cfg.pretrain_steps = static_cast<int>(integer("pretrain_steps", cfg.pretrain_steps));
  cfg.finetune_steps = static_cast<int>(integer("finetune_steps", cfg.finetune_steps));
  cfg.learning_rate = number("learning_rate", cfg.learning_rate);
  cfg.warmup_steps = static_cast<int>(integer("warmup_steps", cfg.warmup_steps));
  cfg.batch_size = static_cast<int>(integer("batch_size", cfg.batch_size));
  cfg.seed = static_cast<std::uint64_t>(integer("seed", static_cast<long long>(cfg.seed)));
  return cfg;
}

Reference parse_reference(const std::string& csv_tokens) {
  Reference ref;
  std::stringstream ss(csv_tokens);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      int t = std::stoi(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size() || t < 0) throw std::invalid_argument(item);
      ref.tokens.push_back(t);
    } catch (const std::exception&) {
      throw_error(ErrorKind::kFormat, "bad token '" + item + "' in reference");
    }
  }
  if (ref.tokens.empty()) throw_error(ErrorKind::kFormat, "empty reference");
  return ref;
}

void write_decode_stats(const StatRecord& rec, const std::filesystem::path& stats_path,
                        const std::filesystem::path& vertices_path) {
  std::string stats = "neg_log_path,neg_log_tokens_given_path,neg_log_marginal\n";
  stats += format_double(rec.neg_log_path, 17) + ",";
  stats += format_double(rec.neg_log_tokens_given_path, 17) + ",";
  stats += format_double(rec.neg_log_marginal, 17) + "\n";
  atomic_write_text(stats_path, stats);

  std::string verts = "vertex,passing_prob,max_token_prob\n";
  for (std::size_t i = 0; i < rec.vertex_stats.size(); ++i) {
    verts += std::to_string(i + 1) + ",";
    verts += format_double(rec.vertex_stats[i].first, 17) + ",";
    verts += format_double(rec.vertex_stats[i].second, 17) + "\n";
  }
  atomic_write_text(vertices_path, verts);
}

void write_report_csv(const Report& report, const std::filesystem::path& report_path,
                      const std::filesystem::path& vertices_path) {
  std::string out =
      "class,strategy,exact_match,neg_log_path,neg_log_tokens_given_path,neg_log_marginal,"
      "fa_loss,confidence\n";
  for (const ClassReport& cr : report.classes) {
    for (const StrategyReport& sr : cr.strategies) {
      out += std::to_string(cr.class_id) + "," + sr.strategy + ",";
      out += std::string(sr.exact_match ? "1" : "0") + ",";
      out += format_double(sr.neg_log_path, 17) + ",";
      out += format_double(sr.neg_log_tokens_given_path, 17) + ",";
      out += format_double(sr.neg_log_marginal, 17) + ",";
      out += format_double(cr.fa_loss, 17) + ",";
      out += format_double(cr.confidence, 17) + "\n";
    }
  }
  atomic_write_text(report_path, out);

  std::string verts = "class,vertex,passing_prob,max_token_prob\n";
  for (const ClassReport& cr : report.classes) {
    for (std::size_t i = 0; i < cr.vertex_stats.size(); ++i) {
      verts += std::to_string(cr.class_id) + "," + std::to_string(i + 1) + ",";
      verts += format_double(cr.vertex_stats[i].first, 17) + ",";
      verts += format_double(cr.vertex_stats[i].second, 17) + "\n";
    }
  }
  atomic_write_text(vertices_path, verts);
}

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path) {
  std::string out = "lambda,objective,exact_match,fa_score\n";
  for (const SweepTable::Row& row : table.rows) {
    out += format_double(row.lambda, 17) + "," + row.objective + ",";
    out += format_double(row.exact_match, 17) + ",";
    out += format_double(row.fa_score, 17) + "\n";
  }
  atomic_write_text(path, out);
}

}  // namespace falign
