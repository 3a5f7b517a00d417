#include "logloom/parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "logloom/errors.hpp"

namespace logloom {

namespace {

std::string regex_escape(std::string_view text) {
  static const std::string_view specials = R"(\^$.|?*+()[]{}/)";
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      while (i + 1 < text.size() &&
             std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        ++i;
      }
      out += R"(\s+)";
      continue;
    }
    if (specials.find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string mask_token(std::string_view token) {
  static const std::regex ipv4(R"(/?\d{1,3}(\.\d{1,3}){3}(:\d+)?)");
  static const std::regex blk(R"(blk_[-+]?\d+)");
  static const std::regex number(R"([-+]?(0[xX][0-9a-fA-F]+|\d+(\.\d+)?([eE][-+]?\d+)?))");
  static const std::regex key_value(R"(([A-Za-z_][\w.-]*[=:])([-+]?\d+(\.\d+)?))");

  if (!has_digit(token)) return std::string(token);

  // Trailing punctuation stays outside the masked core.
  std::size_t end = token.size();
  while (end > 0 && std::string_view(",;)]").find(token[end - 1]) !=
                        std::string_view::npos) {
    --end;
  }
  std::string core(token.substr(0, end));
  std::string tail(token.substr(end));

  std::smatch m;
  if (std::regex_match(core, ipv4) || std::regex_match(core, number)) {
    return std::string(kWildcard) + tail;
  }
  if (std::regex_match(core, blk)) return "blk_" + std::string(kWildcard) + tail;
  if (std::regex_match(core, m, key_value)) {
    return m[1].str() + std::string(kWildcard) + tail;
  }
  return std::string(token);
}

}  // namespace

HeaderFormat::HeaderFormat(std::string_view descriptor)
    : descriptor_(descriptor) {
  std::string pattern = "^";
  std::size_t pos = 0;
  bool saw_content = false;
  while (pos < descriptor.size()) {
    auto open = descriptor.find('<', pos);
    auto close = open == std::string_view::npos
                     ? std::string_view::npos
                     : descriptor.find('>', open);
    if (open == std::string_view::npos || close == std::string_view::npos) {
      pattern += regex_escape(descriptor.substr(pos));
      break;
    }
    pattern += regex_escape(descriptor.substr(pos, open - pos));
    std::string name(descriptor.substr(open + 1, close - open - 1));
    if (name.empty()) throw ConfigError("empty field name in log format");
    if (name == "Content") {
      if (saw_content) throw ConfigError("log format names Content twice");
      saw_content = true;
      content_index_ = fields_.size();
      pattern += "(.*)";
    } else {
      pattern += "(\\S.*?)";
    }
    fields_.push_back(std::move(name));
    pos = close + 1;
  }
  if (!saw_content) throw ConfigError("log format lacks a <Content> field");
  pattern += "$";
  pattern_ = std::regex(pattern);
}

std::optional<RawLogRecord> HeaderFormat::split(std::string_view line,
                                                std::int64_t line_no) const {
  std::string text = trim(line);
  std::smatch m;
  if (!std::regex_match(text, m, pattern_)) return std::nullopt;
  RawLogRecord record;
  record.line_no = line_no;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i == content_index_) {
      record.content = trim(m[i + 1].str());
    } else {
      record.header_fields[fields_[i]] = m[i + 1].str();
    }
  }
  if (record.content.empty()) return std::nullopt;
  return record;
}

std::optional<RawLogRecord> split_header(std::string_view line,
                                         const HeaderFormat& format,
                                         std::int64_t line_no) {
  return format.split(line, line_no);
}

std::string numeric_premask(std::string_view content) {
  std::string out;
  out.reserve(content.size());
  std::size_t i = 0;
  while (i < content.size()) {
    if (std::isspace(static_cast<unsigned char>(content[i]))) {
      out += content[i++];
      continue;
    }
    std::size_t j = i;
    while (j < content.size() &&
           !std::isspace(static_cast<unsigned char>(content[j]))) {
      ++j;
    }
    out += mask_token(content.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view content) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < content.size()) {
    while (i < content.size() &&
           std::isspace(static_cast<unsigned char>(content[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < content.size() &&
           !std::isspace(static_cast<unsigned char>(content[j]))) {
      ++j;
    }
    if (j > i) tokens.emplace_back(content.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string LogTemplate::str() const {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

std::size_t LogTemplate::wildcard_count() const {
  return static_cast<std::size_t>(
      std::count(tokens.begin(), tokens.end(), kWildcard));
}

void DrainConfig::validate() const {
  if (max_depth < 2) throw ConfigError("drain max_depth must be >= 2");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw ConfigError("drain similarity_threshold must lie in (0, 1]");
  }
  if (max_children < 1) throw ConfigError("drain max_children must be >= 1");
}

struct ParseTree::Node {
  std::map<std::string, std::unique_ptr<Node>> children;
  std::vector<int> template_ids;
};

ParseTree::ParseTree(DrainConfig config) : config_(config) { config_.validate(); }
ParseTree::ParseTree(ParseTree&&) noexcept = default;
ParseTree& ParseTree::operator=(ParseTree&&) noexcept = default;
ParseTree::~ParseTree() = default;

double ParseTree::similarity(const std::vector<std::string>& template_tokens,
                             const std::vector<std::string>& line_tokens) {
  if (template_tokens.size() != line_tokens.size() || line_tokens.empty()) {
    return 0.0;
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < line_tokens.size(); ++i) {
    if (template_tokens[i] != kWildcard && template_tokens[i] == line_tokens[i]) {
      ++same;
    }
  }
  return static_cast<double>(same) / static_cast<double>(line_tokens.size());
}

std::vector<int>& ParseTree::leaf_for(const std::vector<std::string>& tokens) {
  auto& slot = by_length_[tokens.size()];
  if (!slot) slot = std::make_unique<Node>();
  Node* node = slot.get();
  const std::size_t prefix =
      std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(config_.max_depth - 2));
  for (std::size_t d = 0; d < prefix; ++d) {
    std::string key = has_digit(tokens[d]) ? std::string(kWildcard) : tokens[d];
    auto it = node->children.find(key);
    if (it == node->children.end()) {
      // Keep one slot for the wildcard child once the node is nearly full.
      const bool room = key == kWildcard ||
                        node->children.size() + 1 <
                            static_cast<std::size_t>(config_.max_children);
      if (!room) key = std::string(kWildcard);
      it = node->children.find(key);
      if (it == node->children.end()) {
        it = node->children.emplace(key, std::make_unique<Node>()).first;
      }
    }
    node = it->second.get();
  }
  return node->template_ids;
}

int ParseTree::parse(std::string_view content) {
  auto tokens = tokenize(numeric_premask(content));
  auto& leaf = leaf_for(tokens);

  int best = -1;
  double best_sim = -1.0;
  std::size_t best_wild = 0;
  for (int id : leaf) {
    const auto& t = templates_[static_cast<std::size_t>(id)];
    double sim = similarity(t.tokens, tokens);
    std::size_t wild = t.wildcard_count();
    if (sim > best_sim || (sim == best_sim && wild > best_wild)) {
      best = id;
      best_sim = sim;
      best_wild = wild;
    }
  }

  if (best >= 0 && best_sim >= config_.similarity_threshold) {
    auto& t = templates_[static_cast<std::size_t>(best)];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (t.tokens[i] != tokens[i]) t.tokens[i] = std::string(kWildcard);
    }
    ++t.support_count;
    return best;
  }

  LogTemplate t;
  t.template_id = static_cast<int>(templates_.size());
  t.tokens = std::move(tokens);
  t.support_count = 1;
  templates_.push_back(std::move(t));
  leaf.push_back(templates_.back().template_id);
  return templates_.back().template_id;
}

LogParser::LogParser(HeaderFormat format, DrainConfig config)
    : format_(std::move(format)), tree_(config) {}

std::optional<std::pair<RawLogRecord, int>> LogParser::consume(
    std::string_view line) {
  auto record = format_.split(line, static_cast<std::int64_t>(consumed_));
  ++consumed_;
  if (!record) {
    ++malformed_;
    return std::nullopt;
  }
  int id = tree_.parse(record->content);
  return std::make_pair(std::move(*record), id);
}

void write_template_table(const std::filesystem::path& path,
                          const std::vector<LogTemplate>& templates) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : templates) {
    out << t.template_id << '\t' << t.support_count << '\t' << t.str() << '\n';
  }
}

std::vector<LogTemplate> read_template_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<LogTemplate> templates;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(row) +
                        ": expected 3 tab-separated columns");
    }
    LogTemplate t;
    try {
      t.template_id = std::stoi(line.substr(0, t1));
      t.support_count = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(row) +
                        ": bad integer column");
    }
    t.tokens = tokenize(std::string_view(line).substr(t2 + 1));
    templates.push_back(std::move(t));
  }
  return templates;
}

void write_structured_csv(const std::filesystem::path& path,
                          const std::vector<StructuredRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const bool labeled = std::any_of(rows.begin(), rows.end(),
                                   [](const auto& r) { return r.label.has_value(); });
  out << (labeled ? "line_no,template_id,label\n" : "line_no,template_id\n");
  for (const auto& r : rows) {
    out << r.line_no << ',' << r.template_id;
    if (labeled) {
      out << ',';
      if (r.label) out << *r.label;
    }
    out << '\n';
  }
}

std::vector<StructuredRow> read_structured_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("line_no,template_id", 0) != 0) {
    throw FormatError(path.string() + ": missing structured-log header");
  }
  std::vector<StructuredRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    bool has_label = static_cast<bool>(std::getline(ss, c, ','));
    StructuredRow r;
    try {
      r.line_no = std::stoll(a);
      r.template_id = std::stoi(b);
      if (has_label && !c.empty()) r.label = std::stoi(c);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace logloom
