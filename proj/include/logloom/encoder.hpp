#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "logloom/parser.hpp"

namespace logloom {

enum class VectorProvenance { kBuiltinHash, kExternalImport };

struct TemplateVector {
  int template_id = 0;
  Eigen::VectorXd values;
};

class VectorTable {
 public:
  VectorTable() = default;
  VectorTable(int dimension, VectorProvenance provenance)
      : dimension_(dimension), provenance_(provenance) {}

  int dimension() const { return dimension_; }
  VectorProvenance provenance() const { return provenance_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(int template_id) const { return vectors_.count(template_id) > 0; }

  // Throws FormatError on a dimension mismatch or non-finite entry.
  void insert(TemplateVector v);
  // Throws MissingVector.
  const Eigen::VectorXd& at(int template_id) const;
  // Throws MissingVector for the first id without an entry.
  void require(const std::vector<int>& template_ids) const;

  const std::map<int, Eigen::VectorXd>& entries() const { return vectors_; }

 private:
  int dimension_ = 0;
  VectorProvenance provenance_ = VectorProvenance::kBuiltinHash;
  std::map<int, Eigen::VectorXd> vectors_;
};

// Token hashing shared by the builtin encoder and its tests.
struct HashedToken {
  int index;   // in [1, D); slot 0 holds the wildcard count
  double sign; // +1 or -1
};
HashedToken hash_token(std::string_view token, int dimension);

// Signed feature hashing of the constant tokens, wildcard count at index 0,
// L2-normalized. Requires dimension >= 8.
TemplateVector encode_builtin(const LogTemplate& t, int dimension);

VectorTable encode_all_builtin(const std::vector<LogTemplate>& templates,
                               int dimension);

// Vector file: "#dim D" then "template_id v_1 ... v_D" per line.
void write_vectors(const std::filesystem::path& path, const VectorTable& table);
VectorTable import_vectors(const std::filesystem::path& path);

}  // namespace logloom
