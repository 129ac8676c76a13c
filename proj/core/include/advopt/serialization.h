// Copyright 2026 The advopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADVOPT_SERIALIZATION_H_
#define ADVOPT_SERIALIZATION_H_

// Model, dataset and certificate files (JSON) and result tables (CSV).
//
// Model file, schema_version 1:
//   {"schema_version": 1, "kind": "pgd" | "admm", "T": <int>,
//    "lambda": <double, admm only>,
//    "layers": [{"mu", "rho", "prox_tau", "M": [[row]...], "B": [[row]...]}],
//    "s0": [...]}
// Dataset file, schema_version 1:
//   {"schema_version": 1, "kind": "dataset", "seed", "n", "m", "k",
//    "matrix_std", "signal_std", "noise_std", "A": [[row]...],
//    "pairs": [{"x": [...], "s": [...]}]}
// Doubles are written in shortest round-trip form, so save -> load is
// bit-exact and save -> load -> save reproduces the same bytes.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "advopt/analysis.h"
#include "advopt/dataset.h"
#include "advopt/optimizers.h"

namespace advopt {

inline constexpr int kSchemaVersion = 1;

std::string ModelToJson(const UnfoldedModel& model);
UnfoldedModel ModelFromJson(std::string_view text);
void SaveModel(const UnfoldedModel& model, const std::filesystem::path& path);
UnfoldedModel LoadModel(const std::filesystem::path& path);

std::string DatasetToJson(const Dataset& data);
Dataset DatasetFromJson(std::string_view text);
void SaveDataset(const Dataset& data, const std::filesystem::path& path);
Dataset LoadDataset(const std::filesystem::path& path);

std::string CertificatesToJson(const UnfoldedModel& model,
                               const std::vector<LipschitzCertificate>& certs);

// Writes to a temporary sibling and renames over `path`, so a failed run
// leaves no partial file behind.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

// %.17g formatting used for every CSV float.
std::string FormatDouble(double v);

// Minimal CSV table builder. Fields never contain separators.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& Row();
  CsvTable& Add(std::string_view s);
  CsvTable& Add(double v);
  CsvTable& Add(long long v);
  CsvTable& Add(int v) { return Add(static_cast<long long>(v)); }
  CsvTable& Add(unsigned long long v);
  std::string str() const;
  size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Grid CSV: a,b,value. Trajectory CSV: step,a,b.
std::string SurfaceGridCsv(const SurfaceGrid& grid);
std::string TrajectoryCsv(const SurfaceGrid& grid);
std::string TrajectoryCsv(const std::vector<std::pair<double, double>>& points);

}  // namespace advopt

#endif  // ADVOPT_SERIALIZATION_H_
