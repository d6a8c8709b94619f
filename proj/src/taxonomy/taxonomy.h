#ifndef LADPROTO_TAXONOMY_TAXONOMY_H_
#define LADPROTO_TAXONOMY_TAXONOMY_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ladproto {

// Opaque class identifier, e.g. an AudioSet machine id such as "/m/0jbk".
using ClassId = std::string;

struct OntologyRecord {
  ClassId id;
  std::string name;
  std::vector<ClassId> child_ids;
};

// Rooted sound-class hierarchy. Immutable after construction; every query is
// const and safe to call concurrently.
//
// A node is "single-path" when exactly one path connects it to a root. Parent,
// depth and distance queries are only defined on single-path nodes; anything
// reachable along two or more paths is reported as ambiguous.
class Taxonomy {
 public:
  // Validates the records: non-empty unique ids, no dangling child ids, no
  // duplicate edges and no cycles. Throws Error on violation.
  explicit Taxonomy(std::vector<OntologyRecord> records);

  size_t size() const { return ids_.size(); }
  bool contains(std::string_view id) const;

  // Ids in document order.
  const std::vector<ClassId>& ids() const { return ids_; }
  const std::vector<ClassId>& roots() const { return roots_; }
  const std::string& name(std::string_view id) const;
  std::vector<ClassId> children(std::string_view id) const;
  std::vector<ClassId> parents(std::string_view id) const;

  bool is_root(std::string_view id) const;
  bool is_single_path(std::string_view id) const;

  // Unique parent of a single-path node; nullopt for roots. Throws a lookup
  // error for unknown ids and an ambiguity error for multi-path nodes.
  std::optional<ClassId> parent_of(std::string_view id) const;

  // Root depth is 0.
  int depth(std::string_view id) const;
  ClassId root_of(std::string_view id) const;

  // Undirected hop distance through the lowest common ancestor. Nodes in
  // different root trees are joined through a virtual super-root, giving
  // depth(a) + depth(b) + 2.
  int distance(std::string_view a, std::string_view b) const;

  // Nodes with two or more distinct root paths.
  std::set<ClassId> multipath_blacklist() const;

  // Single-path nodes whose depth is in keep_depths.
  std::set<ClassId> level_filter(const std::set<int>& keep_depths) const;

  std::vector<OntologyRecord> records() const;

 private:
  size_t index_of(std::string_view id) const;
  size_t single_path_index(std::string_view id) const;

  std::vector<ClassId> ids_;
  std::vector<std::string> names_;
  std::vector<std::vector<size_t>> children_;
  std::vector<std::vector<size_t>> parents_;
  std::vector<int> path_count_;  // saturates at 2
  std::vector<int> depth_;       // -1 for multi-path nodes
  std::vector<ClassId> roots_;
  std::unordered_map<std::string, size_t> index_;
};

// Parses an AudioSet-ontology-shaped JSON array of records with fields `id`,
// `name` and `child_ids`; other fields are ignored.
Taxonomy load_taxonomy(std::string_view document);
Taxonomy load_taxonomy_file(const std::filesystem::path& path);

std::string taxonomy_to_json(const Taxonomy& taxonomy);

}  // namespace ladproto

#endif  // LADPROTO_TAXONOMY_TAXONOMY_H_
