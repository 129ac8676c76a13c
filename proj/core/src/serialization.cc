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

#include "advopt/serialization.h"

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace advopt {

namespace {

using Json = nlohmann::ordered_json;

Json MatrixToJson(const DenseMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json VectorToJson(const DenseVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json Parse(std::string_view text, const char* what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    size_t line = 1;
    const size_t end = std::min<size_t>(e.byte, text.size());
    for (size_t i = 0; i < end; ++i) line += text[i] == '\n';
    throw ParseError(std::string(what) + ": malformed JSON at line " +
                     std::to_string(line) + " (byte " +
                     std::to_string(e.byte) + ")");
  }
}

const Json& Field(const Json& obj, const std::string& key,
                  const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(path + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double Number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path + ": expected a number");
  return j.get<double>();
}

long long Integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path + ": expected an integer");
  return j.get<long long>();
}

DenseVector VectorFromJson(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array");
  DenseVector v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        Number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

DenseMatrix MatrixFromJson(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(path + ": expected a non-empty array of rows");
  }
  const size_t rows = j.size();
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  DenseMatrix m(static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ShapeError(rp + ": ragged row (expected " + std::to_string(cols) +
                       " entries)");
    }
    for (size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          Number(j[i][c], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

void CheckVersion(const Json& root, const char* what) {
  if (!root.is_object() || !root.contains("schema_version")) {
    throw SchemaVersionError(std::string(what) +
                             ": missing schema_version field");
  }
  const Json& v = root.at("schema_version");
  if (!v.is_number_integer() || v.get<long long>() != kSchemaVersion) {
    throw SchemaVersionError(std::string(what) +
                             ": unsupported schema_version " + v.dump() +
                             " (expected " + std::to_string(kSchemaVersion) +
                             ")");
  }
}

}  // namespace

std::string ModelToJson(const UnfoldedModel& model) {
  model.Validate();
  Json root;
  root["schema_version"] = kSchemaVersion;
  root["kind"] = SolverKindName(model.kind);
  root["T"] = model.T();
  if (model.kind == SolverKind::kAdmm) root["lambda"] = model.lambda;
  Json layers = Json::array();
  for (const LayerParams& p : model.layers) {
    Json l;
    l["mu"] = p.mu;
    l["rho"] = p.rho;
    l["prox_tau"] = p.prox_tau;
    l["M"] = MatrixToJson(p.m);
    l["B"] = MatrixToJson(p.b);
    layers.push_back(std::move(l));
  }
  root["layers"] = std::move(layers);
  root["s0"] = VectorToJson(model.s0);
  return root.dump() + "\n";
}

UnfoldedModel ModelFromJson(std::string_view text) {
  const Json root = Parse(text, "model");
  CheckVersion(root, "model");
  UnfoldedModel model;
  const Json& kind = Field(root, "kind", "model");
  if (kind == "pgd") {
    model.kind = SolverKind::kProxGd;
  } else if (kind == "admm") {
    model.kind = SolverKind::kAdmm;
    model.lambda = Number(Field(root, "lambda", "model"), "model.lambda");
  } else {
    throw ParseError("model.kind: expected \"pgd\" or \"admm\", got " +
                     kind.dump());
  }
  const long long T = Integer(Field(root, "T", "model"), "model.T");
  const Json& layers = Field(root, "layers", "model");
  if (!layers.is_array() || static_cast<long long>(layers.size()) != T ||
      T < 1) {
    throw ParseError("model.layers: expected " + std::to_string(T) +
                     " layers");
  }
  model.s0 = VectorFromJson(Field(root, "s0", "model"), "model.s0");
  for (size_t t = 0; t < layers.size(); ++t) {
    const std::string path = "model.layers[" + std::to_string(t) + "]";
    const Json& l = layers[t];
    LayerParams p;
    p.mu = Number(Field(l, "mu", path), path + ".mu");
    p.rho = l.contains("rho") ? Number(l.at("rho"), path + ".rho") : 0.0;
    p.prox_tau = Number(Field(l, "prox_tau", path), path + ".prox_tau");
    p.m = MatrixFromJson(Field(l, "M", path), path + ".M");
    p.b = MatrixFromJson(Field(l, "B", path), path + ".B");
    model.layers.push_back(std::move(p));
  }
  model.Validate();
  return model;
}

void SaveModel(const UnfoldedModel& model, const std::filesystem::path& path) {
  WriteFileAtomic(path, ModelToJson(model));
}

UnfoldedModel LoadModel(const std::filesystem::path& path) {
  try {
    return ModelFromJson(ReadFile(path));
  } catch (const ParseError& e) {
    if (dynamic_cast<const SchemaVersionError*>(&e)) {
      throw SchemaVersionError(path.string() + ": " + e.what());
    }
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string DatasetToJson(const Dataset& data) {
  Json root;
  root["schema_version"] = kSchemaVersion;
  root["kind"] = "dataset";
  root["seed"] = data.seed;
  root["n"] = data.spec.n;
  root["m"] = data.spec.m;
  root["k"] = data.spec.k;
  root["matrix_std"] = data.spec.matrix_std;
  root["signal_std"] = data.spec.signal_std;
  root["noise_std"] = data.spec.noise_std;
  root["A"] = MatrixToJson(data.a);
  Json pairs = Json::array();
  for (Eigen::Index c = 0; c < data.count(); ++c) {
    Json p;
    p["x"] = VectorToJson(data.x.col(c));
    p["s"] = VectorToJson(data.s.col(c));
    pairs.push_back(std::move(p));
  }
  root["pairs"] = std::move(pairs);
  return root.dump() + "\n";
}

Dataset DatasetFromJson(std::string_view text) {
  const Json root = Parse(text, "dataset");
  CheckVersion(root, "dataset");
  if (Field(root, "kind", "dataset") != "dataset") {
    throw ParseError("dataset.kind: expected \"dataset\"");
  }
  Dataset d;
  const Json& seed = Field(root, "seed", "dataset");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw ParseError("dataset.seed: expected an integer");
  }
  d.seed = seed.get<uint64_t>();
  d.spec.n = static_cast<int>(Integer(Field(root, "n", "dataset"), "dataset.n"));
  d.spec.m = static_cast<int>(Integer(Field(root, "m", "dataset"), "dataset.m"));
  d.spec.k = static_cast<int>(Integer(Field(root, "k", "dataset"), "dataset.k"));
  d.spec.matrix_std =
      Number(Field(root, "matrix_std", "dataset"), "dataset.matrix_std");
  d.spec.signal_std =
      Number(Field(root, "signal_std", "dataset"), "dataset.signal_std");
  d.spec.noise_std =
      Number(Field(root, "noise_std", "dataset"), "dataset.noise_std");
  d.a = MatrixFromJson(Field(root, "A", "dataset"), "dataset.A");
  if (d.a.rows() != d.spec.n || d.a.cols() != d.spec.m) {
    throw ShapeError("dataset.A: is " + ShapeString(d.a) + ", expected " +
                     std::to_string(d.spec.n) + "x" +
                     std::to_string(d.spec.m));
  }
  const Json& pairs = Field(root, "pairs", "dataset");
  if (!pairs.is_array() || pairs.empty()) {
    throw ParseError("dataset.pairs: expected a non-empty array");
  }
  d.x.resize(d.spec.n, static_cast<Eigen::Index>(pairs.size()));
  d.s.resize(d.spec.m, static_cast<Eigen::Index>(pairs.size()));
  for (size_t c = 0; c < pairs.size(); ++c) {
    const std::string path = "dataset.pairs[" + std::to_string(c) + "]";
    const DenseVector x = VectorFromJson(Field(pairs[c], "x", path), path + ".x");
    const DenseVector s = VectorFromJson(Field(pairs[c], "s", path), path + ".s");
    if (x.size() != d.spec.n || s.size() != d.spec.m) {
      throw ShapeError(path + ": x/s lengths " + std::to_string(x.size()) +
                       "/" + std::to_string(s.size()) + " do not match n/m");
    }
    d.x.col(static_cast<Eigen::Index>(c)) = x;
    d.s.col(static_cast<Eigen::Index>(c)) = s;
  }
  return d;
}

void SaveDataset(const Dataset& data, const std::filesystem::path& path) {
  WriteFileAtomic(path, DatasetToJson(data));
}

Dataset LoadDataset(const std::filesystem::path& path) {
  try {
    return DatasetFromJson(ReadFile(path));
  } catch (const SchemaVersionError& e) {
    throw SchemaVersionError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string CertificatesToJson(
    const UnfoldedModel& model,
    const std::vector<LipschitzCertificate>& certs) {
  Json root;
  root["schema_version"] = kSchemaVersion;
  root["kind"] = SolverKindName(model.kind);
  root["T"] = model.T();
  Json arr = Json::array();
  for (const LipschitzCertificate& c : certs) {
    Json j;
    j["method"] = std::string(CertificateMethodName(c.method));
    j["C"] = c.c;
    j["per_layer_terms"] = c.per_layer_terms;
    arr.push_back(std::move(j));
  }
  root["certificates"] = std::move(arr);
  return root.dump(2) + "\n";
}

void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header)
    : header_(std::move(header)) {}

CsvTable& CsvTable::Row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::Add(std::string_view s) {
  rows_.back().emplace_back(s);
  return *this;
}

CsvTable& CsvTable::Add(double v) {
  rows_.back().push_back(FormatDouble(v));
  return *this;
}

CsvTable& CsvTable::Add(long long v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::Add(unsigned long long v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::string SurfaceGridCsv(const SurfaceGrid& grid) {
  CsvTable t({"a", "b", "value"});
  for (size_t i = 0; i < grid.coords.size(); ++i) {
    for (size_t j = 0; j < grid.coords.size(); ++j) {
      t.Row().Add(grid.coords[i]).Add(grid.coords[j]).Add(
          grid.values(static_cast<Eigen::Index>(i),
                      static_cast<Eigen::Index>(j)));
    }
  }
  return t.str();
}

std::string TrajectoryCsv(const SurfaceGrid& grid) {
  return TrajectoryCsv(grid.trajectory_2d);
}

std::string TrajectoryCsv(
    const std::vector<std::pair<double, double>>& points) {
  CsvTable t({"step", "a", "b"});
  for (size_t k = 0; k < points.size(); ++k) {
    t.Row()
        .Add(static_cast<long long>(k))
        .Add(points[k].first)
        .Add(points[k].second);
  }
  return t.str();
}

}  // namespace advopt
