// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "condot/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "condot/error.hpp"
#include "condot/io.hpp"
#include "condot/rng.hpp"

namespace condot {

using nlohmann::json;

namespace {

std::string line_ctx(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(ctx + "missing field '" + key + "'");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_number()) throw ValidationError(ctx + "field '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(ctx + "field '" + key + "' is not finite");
  return d;
}

long long require_int(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_number_integer()) throw ValidationError(ctx + "field '" + key + "' must be an integer");
  return v.get<long long>();
}

std::string require_id(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_string() || v.get<std::string>().empty())
    throw ValidationError(ctx + "field '" + key + "' must be a non-empty string");
  return v.get<std::string>();
}

std::vector<double> require_vector(const json& obj, const char* key, const std::string& ctx) {
  const json& v = require(obj, key, ctx);
  if (!v.is_array()) throw ValidationError(ctx + "field '" + key + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ValidationError(ctx + "field '" + key + "' has a non-numeric entry");
    const double d = e.get<double>();
    if (!std::isfinite(d)) throw ValidationError(ctx + "field '" + key + "' has a non-finite entry");
    out.push_back(d);
  }
  return out;
}

json parse_line(const std::string& line, const std::string& ctx) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(ctx + "malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw ValidationError(ctx + "record must be a JSON object");
  return obj;
}

json vector_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double d : v) arr.push_back(d);
  return arr;
}

}  // namespace

void validate_sample(const CalibrationSample& s, std::size_t hidden_dim, const std::string& context) {
  if (s.question_id.empty()) throw ValidationError(context + "empty question_id");
  if (s.prefix_index < 0) throw ValidationError(context + "negative prefix_index");
  if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0)
    throw ValidationError(context + "score outside [0,1]");
  if (s.hidden.size() != hidden_dim)
    throw ValidationError(context + "hidden dimension mismatch: expected " + std::to_string(hidden_dim) +
                          ", got " + std::to_string(s.hidden.size()));
  for (double v : s.hidden)
    if (!std::isfinite(v)) throw ValidationError(context + "non-finite hidden entry");
  if (s.n_rollouts < 1) throw ValidationError(context + "n_rollouts must be positive");
  if (s.n_correct < 0) throw ValidationError(context + "n_correct must be nonnegative");
  if (s.n_correct > s.n_rollouts) throw ValidationError(context + "n_correct exceeds n_rollouts");
  if (s.p_emp != static_cast<double>(s.n_correct) / static_cast<double>(s.n_rollouts))
    throw ValidationError(context + "p_emp disagrees with n_correct / n_rollouts");
}

std::vector<std::string> CalibrationDataset::question_ids() const {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples)
    if (seen.insert(s.question_id).second) ids.push_back(s.question_id);
  return ids;
}

CalibrationDataset CalibrationDataset::subset(const std::set<std::string>& questions, std::string new_name) const {
  CalibrationDataset out;
  out.name = std::move(new_name);
  out.hidden_dim = hidden_dim;
  for (const auto& s : samples)
    if (questions.count(s.question_id)) out.samples.push_back(s);
  return out;
}

CalibrationDataset parse_dataset(std::istream& in, std::string name) {
  CalibrationDataset ds;
  ds.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const std::string ctx = line_ctx(line_no);
    const json obj = parse_line(line, ctx);

    CalibrationSample s;
    s.question_id = require_id(obj, "question_id", ctx);
    s.prefix_index = static_cast<int>(require_int(obj, "prefix_index", ctx));
    s.score = require_number(obj, "score", ctx);
    s.hidden = require_vector(obj, "hidden", ctx);
    s.n_rollouts = static_cast<int>(require_int(obj, "n_rollouts", ctx));
    s.n_correct = static_cast<int>(require_int(obj, "n_correct", ctx));
    if (s.n_rollouts < 1) throw ValidationError(ctx + "n_rollouts must be positive");
    s.p_emp = static_cast<double>(s.n_correct) / static_cast<double>(s.n_rollouts);
    if (auto it = obj.find("p_emp"); it != obj.end()) {
      if (!it->is_number() || it->get<double>() != s.p_emp)
        throw ValidationError(ctx + "stored p_emp disagrees with n_correct / n_rollouts");
    }

    if (ds.samples.empty()) {
      if (s.hidden.empty()) throw ValidationError(ctx + "hidden state must be non-empty");
      ds.hidden_dim = s.hidden.size();
    }
    validate_sample(s, ds.hidden_dim, ctx);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ValidationError("empty dataset");
  return ds;
}

CalibrationDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (format != DatasetFormat::jsonl) throw ValidationError("unsupported dataset format");
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset: " + path.string());
  return parse_dataset(in, path.stem().string());
}

void write_dataset(std::ostream& out, const CalibrationDataset& ds) {
  for (const auto& s : ds.samples) {
    json obj;
    obj["question_id"] = s.question_id;
    obj["prefix_index"] = s.prefix_index;
    obj["score"] = s.score;
    obj["hidden"] = vector_json(s.hidden);
    obj["n_rollouts"] = s.n_rollouts;
    obj["n_correct"] = s.n_correct;
    obj["p_emp"] = s.p_emp;
    out << obj.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const CalibrationDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NumericError("cannot open for writing: " + path.string());
  write_dataset(out, ds);
}

std::vector<CandidatePool> parse_pools(std::istream& in) {
  std::vector<CandidatePool> pools;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const std::string ctx = line_ctx(line_no);
    const json obj = parse_line(line, ctx);

    CandidatePool pool;
    pool.question_id = require_id(obj, "question_id", ctx);
    const std::string qctx = ctx + "question '" + pool.question_id + "': ";
    if (!seen.insert(pool.question_id).second) throw ValidationError(qctx + "duplicate question_id");
    pool.question_score = require_number(obj, "question_score", qctx);
    if (pool.question_score < 0.0 || pool.question_score > 1.0)
      throw ValidationError(qctx + "question_score outside [0,1]");
    pool.question_hidden = require_vector(obj, "question_hidden", qctx);
    if (pools.empty()) dim = pool.question_hidden.size();
    if (pool.question_hidden.size() != dim) throw ValidationError(qctx + "hidden dimension mismatch");

    const json& cands = require(obj, "candidates", qctx);
    if (!cands.is_array() || cands.empty()) throw ValidationError(qctx + "empty candidate list");
    for (const auto& c : cands) {
      if (!c.is_object()) throw ValidationError(qctx + "candidate must be an object");
      Candidate cand;
      cand.score = require_number(c, "score", qctx);
      if (cand.score < 0.0 || cand.score > 1.0) throw ValidationError(qctx + "candidate score outside [0,1]");
      const json& corr = require(c, "correct", qctx);
      if (!corr.is_boolean()) throw ValidationError(qctx + "candidate 'correct' must be a boolean");
      cand.correct = corr.get<bool>();
      pool.candidates.push_back(cand);
    }
    pools.push_back(std::move(pool));
  }
  if (pools.empty()) throw ValidationError("empty pool file");
  return pools;
}

std::vector<CandidatePool> load_pools(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pools: " + path.string());
  return parse_pools(in);
}

void write_pools(std::ostream& out, const std::vector<CandidatePool>& pools) {
  for (const auto& p : pools) {
    json obj;
    obj["question_id"] = p.question_id;
    obj["question_score"] = p.question_score;
    obj["question_hidden"] = vector_json(p.question_hidden);
    json cands = json::array();
    for (const auto& c : p.candidates) cands.push_back({{"score", c.score}, {"correct", c.correct}});
    obj["candidates"] = std::move(cands);
    out << obj.dump() << '\n';
  }
}

void save_pools(const std::filesystem::path& path, const std::vector<CandidatePool>& pools) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NumericError("cannot open for writing: " + path.string());
  write_pools(out, pools);
}

SplitAssignment group_split(const CalibrationDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0,1)");
  std::vector<std::string> ids = ds.question_ids();
  const std::size_t q = ids.size();
  if (q < 2) throw ValidationError("group_split needs at least 2 distinct questions");

  Xoshiro256 rng(seed);
  for (std::size_t i = q - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(ids[i], ids[j]);
  }
  auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(q) + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, q - 1);

  SplitAssignment split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  split.train_questions.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_questions.insert(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return split;
}

void save_split(const std::filesystem::path& path, const SplitAssignment& split) {
  json obj;
  obj["seed"] = split.seed;
  obj["train_fraction"] = split.train_fraction;
  obj["train_questions"] = split.train_questions;
  obj["test_questions"] = split.test_questions;
  io::write_text(path, obj.dump(2) + "\n");
}

SplitAssignment load_split(const std::filesystem::path& path) {
  json obj;
  try {
    obj = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("malformed split file " + path.string() + ": " + e.what());
  }
  SplitAssignment split;
  try {
    split.seed = obj.at("seed").get<std::uint64_t>();
    split.train_fraction = obj.at("train_fraction").get<double>();
    split.train_questions = obj.at("train_questions").get<std::set<std::string>>();
    split.test_questions = obj.at("test_questions").get<std::set<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError("malformed split file " + path.string() + ": " + e.what());
  }
  for (const auto& q : split.train_questions)
    if (split.test_questions.count(q)) throw ValidationError("split file assigns '" + q + "' to both sides");
  return split;
}

}  // namespace condot
