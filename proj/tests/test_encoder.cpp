#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "logloom/encoder.hpp"
#include "logloom/errors.hpp"
#include "logloom/parser.hpp"

using namespace logloom;
namespace fs = std::filesystem;

namespace {

// Independent FNV-1a 64 and splitmix64 finalizer.
std::uint64_t ref_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  }
  return h;
}

std::uint64_t ref_splitmix_finalize(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

LogTemplate make_template(int id, const std::string& text) {
  LogTemplate t;
  t.template_id = id;
  t.tokens = tokenize(text);
  t.support_count = 1;
  return t;
}

// Oracle: dense bag of words over the joint vocabulary, projected through an
// explicit D x V signed hashing matrix, wildcard count in row 0.
Eigen::VectorXd projected_bow(const LogTemplate& t, const std::vector<std::string>& vocab,
                              int D) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(D, static_cast<Eigen::Index>(vocab.size()) + 1);
  P(0, 0) = 1.0;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const std::uint64_t h = ref_fnv(vocab[w]);
    const auto row = static_cast<Eigen::Index>(1 + h % static_cast<std::uint64_t>(D - 1));
    P(row, static_cast<Eigen::Index>(w) + 1) = (ref_splitmix_finalize(h) >> 63) ? -1.0 : 1.0;
  }
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()) + 1);
  for (const auto& tok : t.tokens) {
    if (tok == kWildcard) {
      counts[0] += 1.0;
      continue;
    }
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      if (vocab[w] == tok) counts[static_cast<Eigen::Index>(w) + 1] += 1.0;
    }
  }
  Eigen::VectorXd x = P * counts;
  return x / x.norm();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "logloom_encoder_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("FNV-1a reference vectors") {
  CHECK(ref_fnv("") == 0xcbf29ce484222325ULL);
  CHECK(ref_fnv("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(ref_fnv("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hash_token agrees with the reference hash and stays off slot 0") {
  for (const char* tok : {"block", "blk_<*>", "PacketResponder", "src:", "x"}) {
    for (int D : {8, 64, 768}) {
      const auto h = hash_token(tok, D);
      const std::uint64_t ref = ref_fnv(tok);
      CHECK(h.index == static_cast<int>(1 + ref % static_cast<std::uint64_t>(D - 1)));
      CHECK(h.sign == ((ref_splitmix_finalize(ref) >> 63) ? -1.0 : 1.0));
      CHECK(h.index >= 1);
      CHECK(h.index < D);
    }
  }
}

TEST_CASE("encode_builtin is deterministic and unit norm") {
  const auto t = make_template(3, "PacketResponder <*> for block blk_<*> terminating");
  const auto a = encode_builtin(t, 64);
  const auto b = encode_builtin(t, 64);
  CHECK(a.template_id == 3);
  CHECK(a.values == b.values);
  CHECK(a.values.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a.values[0] > 0.0);  // two wildcards
}

TEST_CASE("cosine of disjoint templates matches the projected bag-of-words oracle") {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"Receiving block blk_<*> src: <*> dest: <*>", "Fatal panic: heap overflow at <*>"},
      {"Verification succeeded for block blk_<*>", "Refused connection attempt <*> denied by peer"},
      {"alpha beta gamma delta", "one two three four five"},
  };
  for (const auto& [x, y] : pairs) {
    const auto tx = make_template(0, x);
    const auto ty = make_template(1, y);
    std::vector<std::string> vocab;
    for (const auto* t : {&tx, &ty}) {
      for (const auto& tok : t->tokens) {
        if (tok != kWildcard && std::find(vocab.begin(), vocab.end(), tok) == vocab.end()) {
          vocab.push_back(tok);
        }
      }
    }
    const auto vx = encode_builtin(tx, 64).values;
    const auto vy = encode_builtin(ty, 64).values;
    const auto ox = projected_bow(tx, vocab, 64);
    const auto oy = projected_bow(ty, vocab, 64);
    CHECK(std::abs(vx.dot(vy) - ox.dot(oy)) < 1e-12);
    CHECK((vx - ox).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encode_builtin rejects tiny dimensions") {
  CHECK_THROWS_AS(encode_builtin(make_template(0, "a b"), 7), ConfigError);
}

TEST_CASE("vector file round-trip is exact") {
  std::vector<LogTemplate> ts = {make_template(0, "a <*> c"), make_template(5, "d e <*> <*>")};
  const auto table = encode_all_builtin(ts, 64);
  write_vectors(scratch("rt.vec"), table);
  const auto back = import_vectors(scratch("rt.vec"));
  CHECK(back.dimension() == 64);
  CHECK(back.provenance() == VectorProvenance::kExternalImport);
  REQUIRE(back.size() == 2);
  for (const auto& [id, v] : table.entries()) CHECK(back.at(id) == v);
}

TEST_CASE("import of a well-formed 768-dimensional file") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::ofstream out(scratch("two.vec"));
  out << "#dim 768\n";
  for (int id : {0, 1}) {
    out << id;
    for (int i = 0; i < 768; ++i) out << ' ' << g(rng);
    out << '\n';
  }
  out.close();
  const auto table = import_vectors(scratch("two.vec"));
  CHECK(table.size() == 2);
  CHECK(table.dimension() == 768);
}

TEST_CASE("import accepts float text as a Python exporter writes it") {
  // repr() style: shortest round-trip digits, exponents, integral floats.
  std::ofstream out(scratch("py.vec"));
  out << "#dim 4\n0 0.1 -1.5e-05 1e-07 2.0\n1 -0.0 3.141592653589793 1.0 -7.25\n";
  out.close();
  const auto table = import_vectors(scratch("py.vec"));
  CHECK(table.at(0)[0] == 0.1);
  CHECK(table.at(0)[1] == -1.5e-05);
  CHECK(table.at(1)[1] == 3.141592653589793);
}

TEST_CASE("import rejects malformed files") {
  auto write = [](const std::string& name, const std::string& body) {
    std::ofstream(scratch(name)) << body;
    return scratch(name);
  };
  CHECK_THROWS_AS(import_vectors(write("mixed.vec", "#dim 3\n0 1 2 3\n1 1 2\n")), FormatError);
  CHECK_THROWS_AS(import_vectors(write("nohdr.vec", "0 1 2 3\n")), FormatError);
  CHECK_THROWS_AS(import_vectors(write("dup.vec", "#dim 1\n0 1\n0 2\n")), FormatError);
  CHECK_THROWS_AS(import_vectors(write("nan.vec", "#dim 1\n0 nan\n")), FormatError);
  CHECK_THROWS_AS(import_vectors(write("word.vec", "#dim 1\n0 abc\n")), FormatError);
  CHECK_THROWS_AS(import_vectors(scratch("does_not_exist.vec")), IoError);
}

TEST_CASE("mixed 768 and 512 rows are a dimension mismatch") {
  std::ofstream out(scratch("mix.vec"));
  out << "#dim 768\n0";
  for (int i = 0; i < 768; ++i) out << " 0.5";
  out << "\n1";
  for (int i = 0; i < 512; ++i) out << " 0.5";
  out << "\n";
  out.close();
  CHECK_THROWS_AS(import_vectors(scratch("mix.vec")), FormatError);
}

TEST_CASE("missing template ids are reported by id") {
  VectorTable table(2, VectorProvenance::kExternalImport);
  table.insert({1, Eigen::Vector2d(1, 0)});
  try {
    table.require({1, 7});
    FAIL("expected MissingVector");
  } catch (const MissingVector& e) {
    CHECK(e.template_id() == 7);
  }
  CHECK_THROWS_AS(table.insert({2, Eigen::Vector3d(1, 0, 0)}), FormatError);
}
