#pragma once

#include <filesystem>
#include <string>

#include "falign/decode.hpp"
#include "falign/lattice.hpp"
#include "falign/train.hpp"

// File formats. All writes are atomic (temp file + rename) and all
// floating-point values in files carry 17 significant digits so a 64-bit
// value round-trips exactly.
//
//   lattice file  JSON {"L", "vocab_size", "transition_logits", "emission_logits"}
//   model file    JSON {"vocab_size", "classes": {"<class id>": <lattice object>}}
//   corpus file   JSON lines, one {"class": int, "reference": [int, ...]} per line
//   config file   JSON with TrainConfig fields; missing keys take the defaults
//   stats CSVs    "neg_log_path,neg_log_tokens_given_path,neg_log_marginal" and
//                 "vertex,passing_prob,max_token_prob"

namespace falign {

LatticeLogits read_lattice_file(const std::filesystem::path& path);
void write_lattice_file(const std::filesystem::path& path, const LatticeLogits& params);

ToyModel read_model_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path, const ToyModel& model);

// vocab_size_override (when > 0) widens the vocabulary beyond the largest
// token id seen in the corpus.
ToyCorpus read_corpus_file(const std::filesystem::path& path, int vocab_size_override = 0);
void write_corpus_file(const std::filesystem::path& path, const ToyCorpus& corpus);

TrainConfig read_config_file(const std::filesystem::path& path);

// "0,1,1" -> Reference{{0, 1, 1}}.
Reference parse_reference(const std::string& csv_tokens);

void write_decode_stats(const StatRecord& rec, const std::filesystem::path& stats_path,
                        const std::filesystem::path& vertices_path);

void write_report_csv(const Report& report, const std::filesystem::path& report_path,
                      const std::filesystem::path& vertices_path);

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path);

void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// printf %.*g with the requested significant digits.
std::string format_double(double value, int sig_digits);

}  // namespace falign
