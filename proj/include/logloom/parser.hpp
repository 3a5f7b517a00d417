#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace logloom {

inline constexpr std::string_view kWildcard = "<*>";

struct RawLogRecord {
  std::int64_t line_no = 0;
  std::map<std::string, std::string> header_fields;
  std::string content;
};

// LogHub-style header descriptor, e.g.
//   "<Date> <Time> <Pid> <Level> <Component>: <Content>"
// Literal text between fields is matched verbatim, runs of spaces match any
// whitespace. Exactly one field must be named Content.
class HeaderFormat {
 public:
  explicit HeaderFormat(std::string_view descriptor);

  // Returns std::nullopt for a MalformedLine: no match, or empty content.
  std::optional<RawLogRecord> split(std::string_view line,
                                    std::int64_t line_no) const;

  const std::vector<std::string>& fields() const { return fields_; }
  const std::string& descriptor() const { return descriptor_; }

 private:
  std::string descriptor_;
  std::vector<std::string> fields_;
  std::size_t content_index_ = 0;
  std::regex pattern_;
};

std::optional<RawLogRecord> split_header(std::string_view line,
                                         const HeaderFormat& format,
                                         std::int64_t line_no = 0);

// Replaces numbers, blk_ ids, IPv4[:port] tokens and key=number values by <*>.
std::string numeric_premask(std::string_view content);

std::vector<std::string> tokenize(std::string_view content);

struct LogTemplate {
  int template_id = 0;
  std::vector<std::string> tokens;
  std::int64_t support_count = 0;

  std::string str() const;
  std::size_t wildcard_count() const;
};

struct DrainConfig {
  int max_depth = 4;
  double similarity_threshold = 0.4;
  int max_children = 100;

  void validate() const;
};

// Fixed-depth parse tree: length layer, then up to max_depth - 2 prefix
// layers, then leaf groups of candidate template ids.
class ParseTree {
 public:
  explicit ParseTree(DrainConfig config = {});
  ParseTree(const ParseTree&) = delete;
  ParseTree& operator=(const ParseTree&) = delete;
  ParseTree(ParseTree&&) noexcept;
  ParseTree& operator=(ParseTree&&) noexcept;
  ~ParseTree();

  // Premasks and routes one content string; returns the matched template id.
  int parse(std::string_view content);

  const std::vector<LogTemplate>& templates() const { return templates_; }
  const DrainConfig& config() const { return config_; }

  // Fraction of positions where the template holds the same constant token.
  static double similarity(const std::vector<std::string>& template_tokens,
                           const std::vector<std::string>& line_tokens);

 private:
  struct Node;
  std::vector<int>& leaf_for(const std::vector<std::string>& tokens);

  DrainConfig config_;
  std::map<std::size_t, std::unique_ptr<Node>> by_length_;
  std::vector<LogTemplate> templates_;
};

inline int parse(const RawLogRecord& record, ParseTree& tree) {
  return tree.parse(record.content);
}

struct StructuredRow {
  std::int64_t line_no = 0;
  int template_id = 0;
  std::optional<int> label;
};

// Streams raw lines through split_header and the tree, counting malformed
// lines instead of failing.
class LogParser {
 public:
  LogParser(HeaderFormat format, DrainConfig config = {});

  // Returns the parsed record (with its template id) or nullopt if malformed.
  std::optional<std::pair<RawLogRecord, int>> consume(std::string_view line);

  const ParseTree& tree() const { return tree_; }
  std::size_t malformed() const { return malformed_; }
  std::size_t consumed() const { return consumed_; }

 private:
  HeaderFormat format_;
  ParseTree tree_;
  std::size_t malformed_ = 0;
  std::size_t consumed_ = 0;
};

void write_template_table(const std::filesystem::path& path,
                          const std::vector<LogTemplate>& templates);
std::vector<LogTemplate> read_template_table(const std::filesystem::path& path);

void write_structured_csv(const std::filesystem::path& path,
                          const std::vector<StructuredRow>& rows);
std::vector<StructuredRow> read_structured_csv(const std::filesystem::path& path);

}  // namespace logloom
