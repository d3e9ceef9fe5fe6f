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

#include "condot/checkpoint.hpp"

#include <cstdint>
#include <cstring>

#include <json.hpp>
#include <openssl/evp.h>

#include "condot/error.hpp"
#include "condot/io.hpp"

namespace condot {

using json = nlohmann::ordered_json;

namespace {

struct NamedArray {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // column-major
};

std::string to_le_bytes(const std::vector<double>& v) {
  std::string out(v.size() * 8, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &v[i], 8);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

std::vector<double> from_le_bytes(const std::string& bytes) {
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{static_cast<unsigned char>(bytes[i * 8 + b])} << (8 * b);
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

std::string base64_encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(const std::string& text, const std::string& what) {
  if (text.size() % 4 != 0) throw ValidationError("checkpoint: truncated payload for '" + what + "'");
  std::string out(text.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("checkpoint: malformed payload for '" + what + "'");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

void append_u32(std::string& s, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::string canonical_stream(const std::vector<NamedArray>& arrays) {
  std::string s;
  for (const auto& a : arrays) {
    s += a.name;
    s.push_back('\0');
    append_u32(s, static_cast<std::uint32_t>(a.rows));
    append_u32(s, static_cast<std::uint32_t>(a.cols));
    s += to_le_bytes(a.data);
  }
  return s;
}

json encode_arrays(const std::vector<NamedArray>& arrays) {
  json out = json::array();
  for (const auto& a : arrays)
    out.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}, {"data", base64_encode(to_le_bytes(a.data))}});
  return out;
}

std::vector<NamedArray> decode_arrays(const json& j) {
  if (!j.is_array()) throw ValidationError("checkpoint: 'arrays' must be a list");
  std::vector<NamedArray> out;
  for (const auto& e : j) {
    NamedArray a;
    try {
      a.name = e.at("name").get<std::string>();
      a.rows = e.at("rows").get<int>();
      a.cols = e.at("cols").get<int>();
      if (a.rows < 0 || a.cols < 0) throw ValidationError("checkpoint: negative shape for '" + a.name + "'");
      const std::string bytes = base64_decode(e.at("data").get<std::string>(), a.name);
      if (bytes.size() != static_cast<std::size_t>(a.rows) * static_cast<std::size_t>(a.cols) * 8)
        throw ValidationError("checkpoint: truncated payload for '" + a.name + "'");
      a.data = from_le_bytes(bytes);
    } catch (const json::exception& ex) {
      throw ValidationError(std::string("checkpoint: malformed array entry: ") + ex.what());
    }
    out.push_back(std::move(a));
  }
  return out;
}

void potential_arrays(const std::string& prefix, const PicnnPotential& p, std::vector<NamedArray>& out) {
  const auto params = p.params();
  for (const auto& b : p.layout())
    out.push_back({prefix + b.name, b.rows, b.cols,
                   std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                       params.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size()))});
}

PicnnPotential restore_potential(const std::string& prefix, const PicnnConfig& cfg,
                                 const std::vector<NamedArray>& arrays) {
  PicnnPotential p(cfg);
  for (const auto& b : p.layout()) {
    const std::string name = prefix + b.name;
    const NamedArray* found = nullptr;
    for (const auto& a : arrays)
      if (a.name == name) found = &a;
    if (!found) throw ValidationError("checkpoint: missing array '" + name + "'");
    if (found->rows != b.rows || found->cols != b.cols)
      throw ValidationError("checkpoint: array '" + name + "' has the wrong shape");
    std::copy(found->data.begin(), found->data.end(), p.params().begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  return p;
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw ValidationError("checkpoint: missing array '" + name + "'");
}

json pconfig_json(const PicnnConfig& c) {
  return {{"input_dim", c.input_dim},
          {"embed_dims", c.embed_dims},
          {"hidden_dim_context", c.hidden_dim_context},
          {"hidden_dim_convex", c.hidden_dim_convex},
          {"num_layers", c.num_layers}};
}

PicnnConfig pconfig_from_json(const json& j) {
  PicnnConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.embed_dims = j.at("embed_dims").get<std::vector<int>>();
  c.hidden_dim_context = j.at("hidden_dim_context").get<int>();
  c.hidden_dim_convex = j.at("hidden_dim_convex").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.validate();
  return c;
}

void write_envelope(const std::filesystem::path& path, const json& fields, const std::vector<NamedArray>& arrays) {
  json env = {{"format_version", kCheckpointVersion}};
  for (const auto& [k, v] : fields.items()) env[k] = v;
  env["arrays"] = encode_arrays(arrays);
  env["digest"] = sha256_hex(canonical_stream(arrays));
  io::write_text(path, env.dump(1) + "\n");
}

json read_envelope(const std::filesystem::path& path) {
  json env;
  try {
    env = json::parse(io::read_text(path));
  } catch (const json::parse_error&) {
    throw ValidationError("checkpoint " + path.string() + ": truncated or malformed JSON");
  }
  if (!env.is_object() || !env.contains("format_version"))
    throw ValidationError("checkpoint " + path.string() + ": missing format_version");
  if (!env["format_version"].is_number_integer() || env["format_version"].get<int>() != kCheckpointVersion)
    throw ValidationError("checkpoint " + path.string() + ": unsupported format_version " +
                          env["format_version"].dump() + " (expected " + std::to_string(kCheckpointVersion) + ")");
  return env;
}

std::vector<NamedArray> verified_arrays(const json& env, const std::filesystem::path& path) {
  if (!env.contains("arrays") || !env.contains("digest"))
    throw ValidationError("checkpoint " + path.string() + ": truncated envelope");
  auto arrays = decode_arrays(env["arrays"]);
  if (sha256_hex(canonical_stream(arrays)) != env["digest"].get<std::string>())
    throw ValidationError("checkpoint " + path.string() + ": digest mismatch");
  return arrays;
}

std::string expect_kind(const json& env, const std::string& kind, const std::filesystem::path& path) {
  const std::string k = env.value("kind", "");
  if (k != kind) throw ValidationError("checkpoint " + path.string() + ": expected kind '" + kind + "', found '" + k + "'");
  return k;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("sha256: digest computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

OtQuantileModel OtCheckpoint::model() const {
  return OtQuantileModel(inference == InferencePotential::g ? g : f, source_mode, inference, source_table);
}

void save_checkpoint(const std::filesystem::path& path, const OtCheckpoint& ckpt) {
  if (!(ckpt.f.config() == ckpt.g.config())) throw ValidationError("checkpoint: f and g configs differ");
  std::vector<NamedArray> arrays;
  potential_arrays("f.", ckpt.f, arrays);
  potential_arrays("g.", ckpt.g, arrays);
  if (ckpt.source_table)
    arrays.push_back({"source_table", static_cast<int>(ckpt.source_table->knots.size()), 1, ckpt.source_table->knots});
  json env = {{"kind", "ot"},
              {"pconfig", pconfig_json(ckpt.f.config())},
              {"source_mode", ckpt.source_mode == SourceMode::uniform ? "uniform" : "score"},
              {"inference_potential", ckpt.inference == InferencePotential::g ? "g" : "f"}};
  write_envelope(path, env, arrays);
}

OtCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const json env = read_envelope(path);
  expect_kind(env, "ot", path);
  const auto arrays = verified_arrays(env, path);
  OtCheckpoint c;
  try {
    const PicnnConfig cfg = pconfig_from_json(env.at("pconfig"));
    c.f = restore_potential("f.", cfg, arrays);
    c.g = restore_potential("g.", cfg, arrays);
    const std::string mode = env.at("source_mode").get<std::string>();
    if (mode != "uniform" && mode != "score") throw ValidationError("checkpoint: unknown source_mode '" + mode + "'");
    c.source_mode = mode == "uniform" ? SourceMode::uniform : SourceMode::score;
    const std::string inf = env.at("inference_potential").get<std::string>();
    if (inf != "g" && inf != "f") throw ValidationError("checkpoint: unknown inference_potential '" + inf + "'");
    c.inference = inf == "g" ? InferencePotential::g : InferencePotential::f;
  } catch (const json::exception& ex) {
    throw ValidationError("checkpoint " + path.string() + ": " + ex.what());
  }
  for (const auto& a : arrays)
    if (a.name == "source_table") c.source_table = SourceQuantileTable{a.data};
  if (c.source_mode == SourceMode::score && !c.source_table)
    throw ValidationError("checkpoint " + path.string() + ": score mode without a source table");
  return c;
}

void save_qr_checkpoint(const std::filesystem::path& path, const QrModel& model) {
  const auto& W = model.weights();
  std::vector<NamedArray> arrays;
  arrays.push_back({"levels", static_cast<int>(model.levels().size()), 1, model.levels()});
  arrays.push_back({"weights", static_cast<int>(W.rows()), static_cast<int>(W.cols()),
                    std::vector<double>(W.data(), W.data() + W.size())});
  arrays.push_back({"biases", static_cast<int>(model.biases().size()), 1,
                    std::vector<double>(model.biases().data(), model.biases().data() + model.biases().size())});
  write_envelope(path, json{{"kind", "qr"}}, arrays);
}

QrModel load_qr_checkpoint(const std::filesystem::path& path) {
  const json env = read_envelope(path);
  expect_kind(env, "qr", path);
  const auto arrays = verified_arrays(env, path);
  const NamedArray& lv = find_array(arrays, "levels");
  const NamedArray& w = find_array(arrays, "weights");
  const NamedArray& b = find_array(arrays, "biases");
  return QrModel(Eigen::Map<const Eigen::MatrixXd>(w.data.data(), w.rows, w.cols),
                 Eigen::Map<const Eigen::VectorXd>(b.data.data(), b.rows), lv.data);
}

std::string checkpoint_kind(const std::filesystem::path& path) {
  const json env = read_envelope(path);
  const std::string k = env.value("kind", "");
  if (k != "ot" && k != "qr") throw ValidationError("checkpoint " + path.string() + ": unknown kind '" + k + "'");
  return k;
}

std::unique_ptr<QuantileModel> load_quantile_model(const std::filesystem::path& path) {
  if (checkpoint_kind(path) == "qr") return std::make_unique<QrModel>(load_qr_checkpoint(path));
  return std::make_unique<OtQuantileModel>(load_checkpoint(path).model());
}

}  // namespace condot
