#include "meraugcn/augraph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "meraugcn/errors.hpp"

namespace meraugcn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

// Roman numerals of arbitrary size parse, so that "VI" reaches the
// class-range check instead of failing as malformed.
std::optional<int> parse_roman(std::string_view s) {
  static const std::map<char, int> digits{{'I', 1}, {'V', 5}, {'X', 10}, {'L', 50}};
  if (s.empty()) return std::nullopt;
  int total = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto it = digits.find(s[i]);
    if (it == digits.end()) return std::nullopt;
    int v = it->second;
    if (i + 1 < s.size()) {
      auto next = digits.find(s[i + 1]);
      if (next != digits.end() && next->second > v) v = -v;
    }
    total += v;
  }
  return total > 0 ? std::optional<int>(total) : std::nullopt;
}

std::vector<std::uint8_t> identity(std::size_t k) {
  std::vector<std::uint8_t> adj(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) adj[i * k + i] = 1;
  return adj;
}

}  // namespace

std::set<int> AuRelationSet::classes() const {
  std::set<int> out;
  for (const auto& e : entries) out.insert(e.class_id);
  return out;
}

std::set<int> AuRelationSet::all_aus() const {
  std::set<int> out;
  for (const auto& e : entries) out.insert(e.aus.begin(), e.aus.end());
  return out;
}

AuGraph::AuGraph(std::vector<int> nodes, std::vector<std::uint8_t> adjacency)
    : nodes_(std::move(nodes)), adjacency_(std::move(adjacency)) {
  const std::size_t k = nodes_.size();
  if (adjacency_.size() != k * k) {
    throw ShapeError("AuGraph: adjacency has " + std::to_string(adjacency_.size()) +
                     " entries, expected K*K with K=" + std::to_string(k));
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (nodes_[i] <= 0) throw ValidationError("AuGraph: AU ids must be positive");
    if (i > 0 && nodes_[i] <= nodes_[i - 1]) {
      throw ValidationError("AuGraph: node ids must be strictly ascending (AU" +
                            std::to_string(nodes_[i]) + ")");
    }
    if (at(i, i) != 1) throw ValidationError("AuGraph: diagonal entries must be 1");
    for (std::size_t j = 0; j < k; ++j) {
      const auto v = at(i, j);
      if (v > 1) throw ValidationError("AuGraph: adjacency entries must be 0 or 1");
      if (v != at(j, i)) throw ValidationError("AuGraph: adjacency is not symmetric");
    }
  }
}

std::optional<std::size_t> AuGraph::index_of(int au) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), au);
  if (it == nodes_.end() || *it != au) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

bool AuGraph::has_edge(int au_a, int au_b) const {
  const auto i = index_of(au_a);
  const auto j = index_of(au_b);
  return i && j && at(*i, *j) == 1;
}

std::vector<double> AuGraph::as_matrix() const {
  return {adjacency_.begin(), adjacency_.end()};
}

AuRelationSet parse_relation_table(std::string_view source) {
  AuRelationSet out;
  const auto lines = split_lines(source);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    auto line = trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError("expected '<class>: AU..'", line_no);
    const auto cls_text = trim(line.substr(0, colon));
    const auto cls = parse_roman(cls_text);
    if (!cls) throw ParseError("bad class numeral '" + std::string(cls_text) + "'", line_no);
    if (*cls < 1 || *cls > 5) {
      throw ValidationError("line " + std::to_string(line_no) + ": unknown class id " +
                            std::string(cls_text));
    }

    RelationEntry entry{*cls, {}};
    auto rest = line.substr(colon + 1);
    while (true) {
      const auto plus = rest.find('+');
      const auto token = trim(rest.substr(0, plus));
      if (token.size() < 3 || token.substr(0, 2) != "AU") {
        throw ParseError("expected AU<id>, got '" + std::string(token) + "'", line_no);
      }
      const auto id = parse_int(token.substr(2));
      if (!id || *id <= 0) throw ParseError("bad AU id '" + std::string(token) + "'", line_no);
      if (std::find(entry.aus.begin(), entry.aus.end(), *id) != entry.aus.end()) {
        throw ParseError("AU" + std::to_string(*id) + " repeated in combination", line_no);
      }
      entry.aus.push_back(*id);
      if (plus == std::string_view::npos) break;
      rest = rest.substr(plus + 1);
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

AuGraph build_graph(const AuRelationSet& relations) {
  if (relations.empty()) throw ContractError("build_graph: relation set is empty");
  const auto au_set = relations.all_aus();
  std::vector<int> nodes(au_set.begin(), au_set.end());
  const std::size_t k = nodes.size();
  auto adj = identity(k);
  auto index = [&](int au) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), au) -
                                    nodes.begin());
  };
  for (const auto& e : relations.entries) {
    for (int a : e.aus) {
      for (int b : e.aus) adj[index(a) * k + index(b)] = 1;
    }
  }
  return AuGraph(std::move(nodes), std::move(adj));
}

AuGraph prune_graph(const AuGraph& graph, const std::set<int>& absent) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (!absent.contains(graph.nodes()[i])) keep.push_back(i);
  }
  if (keep.empty()) throw ValidationError("prune_graph: pruning removes every node");
  std::vector<int> nodes;
  std::vector<std::uint8_t> adj;
  adj.reserve(keep.size() * keep.size());
  for (auto i : keep) {
    nodes.push_back(graph.nodes()[i]);
    for (auto j : keep) adj.push_back(graph.at(i, j));
  }
  return AuGraph(std::move(nodes), std::move(adj));
}

AuGraph dense_graph(std::vector<int> nodes) {
  if (nodes.empty()) throw ContractError("dense_graph: node list is empty");
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw ValidationError("dense_graph: duplicate node ids");
  }
  const std::size_t k = nodes.size();
  return AuGraph(std::move(nodes), std::vector<std::uint8_t>(k * k, 1));
}

std::string serialize_graph(const AuGraph& graph) {
  std::ostringstream os;
  const std::size_t k = graph.size();
  os << "AUGRAPH v1 K=" << k << '\n';
  for (std::size_t i = 0; i < k; ++i) os << (i ? " " : "") << graph.nodes()[i];
  os << '\n';
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) os << (j ? " " : "") << int(graph.at(i, j));
    os << '\n';
  }
  return os.str();
}

AuGraph parse_graph(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty graph file", 1);
  const auto header = trim(lines[0]);
  constexpr std::string_view prefix = "AUGRAPH v1 K=";
  if (header.substr(0, prefix.size()) != prefix) {
    throw ParseError("expected header 'AUGRAPH v1 K=<n>'", 1);
  }
  const auto k_parsed = parse_int(header.substr(prefix.size()));
  if (!k_parsed || *k_parsed <= 0) throw ParseError("bad node count", 1);
  const auto k = static_cast<std::size_t>(*k_parsed);
  if (lines.size() < k + 2) throw ParseError("truncated graph file", lines.size());

  auto read_row = [&](std::size_t line_idx) {
    std::vector<int> row;
    std::istringstream is{std::string(lines[line_idx])};
    std::string tok;
    while (is >> tok) {
      const auto v = parse_int(tok);
      if (!v) throw ParseError("bad integer '" + tok + "'", line_idx + 1);
      row.push_back(*v);
    }
    if (row.size() != k) {
      throw ParseError("expected " + std::to_string(k) + " values", line_idx + 1);
    }
    return row;
  };

  std::vector<int> nodes = read_row(1);
  std::vector<std::uint8_t> adj;
  adj.reserve(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (int v : read_row(i + 2)) {
      if (v != 0 && v != 1) throw ParseError("adjacency entries must be 0 or 1", i + 3);
      adj.push_back(static_cast<std::uint8_t>(v));
    }
  }
  for (std::size_t i = k + 2; i < lines.size(); ++i) {
    if (!trim(lines[i]).empty()) throw ParseError("trailing content", i + 1);
  }
  return AuGraph(std::move(nodes), std::move(adj));
}

AuGraph read_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open graph file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str());
}

void write_graph_file(const std::string& path, const AuGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph file " + path);
  out << serialize_graph(graph);
  if (!out) throw IoError("write failed for " + path);
}

std::string_view objective_class_table() {
  static constexpr std::string_view table =
      "# AU combinations assigned to objective classes I-V.\n"
      "# One combination per line: <class>: AU<i>+AU<j>+...\n"
      "I: AU6\n"
      "I: AU12\n"
      "I: AU6+AU12\n"
      "I: AU6+AU7+AU12\n"
      "I: AU7+AU12\n"
      "II: AU1+AU2\n"
      "II: AU5\n"
      "II: AU25\n"
      "II: AU1+AU2+AU25\n"
      "II: AU25+AU26\n"
      "II: AU5+AU24\n"
      "III: AU23\n"
      "III: AU4\n"
      "III: AU4+AU7\n"
      "III: AU4+AU5\n"
      "III: AU4+AU5+AU7\n"
      "III: AU17+AU24\n"
      "III: AU4+AU6+AU7\n"
      "III: AU4+AU38\n"
      "IV: AU10\n"
      "IV: AU9\n"
      "IV: AU4+AU9\n"
      "IV: AU4+AU40\n"
      "IV: AU4+AU5+AU40\n"
      "IV: AU4+AU7+AU9\n"
      "IV: AU4+AU9+AU17\n"
      "IV: AU4+AU7+AU10\n"
      "IV: AU4+AU5+AU7+AU9\n"
      "IV: AU7+AU10\n"
      "V: AU1\n"
      "V: AU15\n"
      "V: AU1+AU4\n"
      "V: AU6+AU15\n"
      "V: AU15+AU17\n";
  return table;
}

const AuRelationSet& objective_class_relations() {
  static const AuRelationSet relations = parse_relation_table(objective_class_table());
  return relations;
}

const std::set<int>& default_absent_aus() {
  static const std::set<int> absent{23, 24, 26, 38, 40};
  return absent;
}

GraphKind parse_graph_kind(std::string_view name) {
  if (name == "pruned") return GraphKind::pruned;
  if (name == "original") return GraphKind::original;
  if (name == "dense") return GraphKind::dense;
  throw ValidationError("unknown graph kind '" + std::string(name) +
                        "' (expected pruned|original|dense)");
}

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::pruned: return "pruned";
    case GraphKind::original: return "original";
    case GraphKind::dense: return "dense";
  }
  return "?";
}

AuGraph make_graph(GraphKind kind) {
  const auto original = build_graph(objective_class_relations());
  switch (kind) {
    case GraphKind::original: return original;
    case GraphKind::pruned: return prune_graph(original, default_absent_aus());
    case GraphKind::dense: return dense_graph(prune_graph(original, default_absent_aus()).nodes());
  }
  throw ValidationError("unknown graph kind");
}

}  // namespace meraugcn
