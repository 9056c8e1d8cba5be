#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace meraugcn {

struct RelationEntry {
  int class_id = 0;      // 1..5
  std::vector<int> aus;  // in table order

  bool operator==(const RelationEntry&) const = default;
};

/// Objective class -> AU combination table, one entry per combination.
struct AuRelationSet {
  std::vector<RelationEntry> entries;

  bool empty() const { return entries.empty(); }
  std::set<int> classes() const;
  std::set<int> all_aus() const;
};

/// Undirected 0/1 AU relation graph with self-loops. Nodes are kept in
/// ascending AU id order; row/column i of the adjacency refers to nodes()[i].
class AuGraph {
public:
  /// Validates symmetry, unit diagonal and strictly ascending node ids.
  AuGraph(std::vector<int> nodes, std::vector<std::uint8_t> adjacency);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<int>& nodes() const { return nodes_; }
  const std::vector<std::uint8_t>& adjacency() const { return adjacency_; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return adjacency_[i * size() + j]; }
  std::optional<std::size_t> index_of(int au) const;
  bool has_edge(int au_a, int au_b) const;

  /// Adjacency as a row-major K*K real matrix.
  std::vector<double> as_matrix() const;

  bool operator==(const AuGraph&) const = default;

private:
  std::vector<int> nodes_;
  std::vector<std::uint8_t> adjacency_;
};

AuRelationSet parse_relation_table(std::string_view source);

/// Node set is the union of AU ids; edges join AUs that share a combination.
AuGraph build_graph(const AuRelationSet& relations);

/// Removes the given AUs (ids not in the graph are ignored).
AuGraph prune_graph(const AuGraph& graph, const std::set<int>& absent);

AuGraph dense_graph(std::vector<int> nodes);

std::string serialize_graph(const AuGraph& graph);
AuGraph parse_graph(std::string_view text);
AuGraph read_graph_file(const std::string& path);
void write_graph_file(const std::string& path, const AuGraph& graph);

/// The objective-class table shipped with the library (data/objective_classes.txt).
std::string_view objective_class_table();
const AuRelationSet& objective_class_relations();

/// AUs missing from one of the two training databases; pruned by default.
const std::set<int>& default_absent_aus();

enum class GraphKind { pruned, original, dense };

GraphKind parse_graph_kind(std::string_view name);
std::string_view to_string(GraphKind kind);

/// pruned: table graph minus default_absent_aus() (12 nodes).
/// original: unpruned table graph (17 nodes).
/// dense: fully connected over the pruned node set.
AuGraph make_graph(GraphKind kind);

}  // namespace meraugcn
