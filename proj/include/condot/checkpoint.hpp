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

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "condot/picnn.hpp"
#include "condot/quantile_models.hpp"

namespace condot {

inline constexpr int kCheckpointVersion = 1;

/// Trained transport potentials plus what inference needs to use them.
struct OtCheckpoint {
  PicnnPotential f;
  PicnnPotential g;
  SourceMode source_mode = SourceMode::uniform;
  InferencePotential inference = InferencePotential::g;
  std::optional<SourceQuantileTable> source_table;

  OtQuantileModel model() const;
};

/// JSON envelope; every numeric array is stored as base64 of its IEEE-754
/// binary64 little-endian bytes. `digest` is the SHA-256 (hex) of the
/// canonical stream: for each array in file order, its name, a NUL byte,
/// rows and cols as u32 little-endian, then the payload bytes.
void save_checkpoint(const std::filesystem::path& path, const OtCheckpoint& ckpt);
OtCheckpoint load_checkpoint(const std::filesystem::path& path);

void save_qr_checkpoint(const std::filesystem::path& path, const QrModel& model);
QrModel load_qr_checkpoint(const std::filesystem::path& path);

/// "ot" or "qr", read from the envelope without verifying the digest.
std::string checkpoint_kind(const std::filesystem::path& path);

/// Loads either checkpoint kind as a quantile model.
std::unique_ptr<QuantileModel> load_quantile_model(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);

}  // namespace condot
