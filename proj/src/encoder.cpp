#include "logloom/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "logloom/errors.hpp"

namespace logloom {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void VectorTable::insert(TemplateVector v) {
  if (v.values.size() != dimension_) {
    throw FormatError("vector for template " + std::to_string(v.template_id) +
                      " has dimension " + std::to_string(v.values.size()) +
                      ", expected " + std::to_string(dimension_));
  }
  if (!v.values.allFinite()) {
    throw FormatError("vector for template " + std::to_string(v.template_id) +
                      " has non-finite entries");
  }
  vectors_[v.template_id] = std::move(v.values);
}

const Eigen::VectorXd& VectorTable::at(int template_id) const {
  auto it = vectors_.find(template_id);
  if (it == vectors_.end()) throw MissingVector(template_id);
  return it->second;
}

void VectorTable::require(const std::vector<int>& template_ids) const {
  for (int id : template_ids) {
    if (!contains(id)) throw MissingVector(id);
  }
}

HashedToken hash_token(std::string_view token, int dimension) {
  const std::uint64_t h = fnv1a(token);
  const std::uint64_t s = mix64(h);
  return {1 + static_cast<int>(h % static_cast<std::uint64_t>(dimension - 1)),
          (s >> 63) ? -1.0 : 1.0};
}

TemplateVector encode_builtin(const LogTemplate& t, int dimension) {
  if (dimension < 8) throw ConfigError("builtin encoder needs dimension >= 8");
  TemplateVector v{t.template_id, Eigen::VectorXd::Zero(dimension)};
  for (const auto& token : t.tokens) {
    if (token == kWildcard) {
      v.values[0] += 1.0;
      continue;
    }
    auto [index, sign] = hash_token(token, dimension);
    v.values[index] += sign;
  }
  const double norm = v.values.norm();
  if (norm > 0.0) v.values /= norm;
  return v;
}

VectorTable encode_all_builtin(const std::vector<LogTemplate>& templates,
                               int dimension) {
  VectorTable table(dimension, VectorProvenance::kBuiltinHash);
  for (const auto& t : templates) table.insert(encode_builtin(t, dimension));
  return table;
}

void write_vectors(const std::filesystem::path& path, const VectorTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "#dim " << table.dimension() << '\n';
  char buf[40];
  for (const auto& [id, values] : table.entries()) {
    out << id;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %.17g", values[i]);
      out << buf;
    }
    out << '\n';
  }
}

VectorTable import_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("#dim ", 0) != 0) {
    throw FormatError(path.string() + ": missing '#dim D' header");
  }
  int dim = 0;
  try {
    dim = std::stoi(line.substr(5));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad dimension in header");
  }
  if (dim <= 0) throw FormatError(path.string() + ": dimension must be positive");

  VectorTable table(dim, VectorProvenance::kExternalImport);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long id = 0;
    if (!(ss >> id)) {
      throw FormatError(path.string() + ":" + std::to_string(row) + ": bad template id");
    }
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      char* end = nullptr;
      double x = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') {
        throw FormatError(path.string() + ":" + std::to_string(row) +
                          ": bad number '" + field + "'");
      }
      values.push_back(x);
    }
    if (values.size() != static_cast<std::size_t>(dim)) {
      throw FormatError(path.string() + ":" + std::to_string(row) + ": row has " +
                        std::to_string(values.size()) + " values, header says " +
                        std::to_string(dim));
    }
    if (table.contains(static_cast<int>(id))) {
      throw FormatError(path.string() + ": duplicate template id " + std::to_string(id));
    }
    table.insert({static_cast<int>(id),
                  Eigen::Map<Eigen::VectorXd>(values.data(), dim)});
  }
  return table;
}

}  // namespace logloom
