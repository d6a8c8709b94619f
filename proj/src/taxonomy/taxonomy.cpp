#include "taxonomy/taxonomy.h"

#include <algorithm>
#include <deque>
#include <sstream>

#include "common/error.h"
#include "common/io.h"
#include "json.hpp"

namespace ladproto {

using json = nlohmann::json;

namespace {

std::string describe_cycle(const std::vector<ClassId>& ids, const std::vector<size_t>& cycle) {
  std::string out;
  for (size_t i : cycle) {
    out += ids[i];
    out += " -> ";
  }
  out += ids[cycle.front()];
  return out;
}

// Returns one cycle as a node sequence, or empty when the graph is acyclic.
std::vector<size_t> find_cycle(const std::vector<std::vector<size_t>>& children) {
  const size_t n = children.size();
  enum Color : char { kWhite, kGray, kBlack };
  std::vector<Color> color(n, kWhite);
  std::vector<size_t> stack;
  std::vector<size_t> next_child;
  for (size_t start = 0; start < n; ++start) {
    if (color[start] != kWhite) continue;
    stack.assign(1, start);
    next_child.assign(1, 0);
    color[start] = kGray;
    while (!stack.empty()) {
      const size_t u = stack.back();
      if (next_child.back() < children[u].size()) {
        const size_t v = children[u][next_child.back()++];
        if (color[v] == kGray) {
          auto it = std::find(stack.begin(), stack.end(), v);
          return std::vector<size_t>(it, stack.end());
        }
        if (color[v] == kWhite) {
          color[v] = kGray;
          stack.push_back(v);
          next_child.push_back(0);
        }
      } else {
        color[u] = kBlack;
        stack.pop_back();
        next_child.pop_back();
      }
    }
  }
  return {};
}

std::string line_column(std::string_view doc, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Taxonomy::Taxonomy(std::vector<OntologyRecord> records) {
  const size_t n = records.size();
  ids_.reserve(n);
  names_.reserve(n);
  for (auto& r : records) {
    if (r.id.empty()) fail(ErrorKind::kValidation, "ontology record with empty id");
    if (!index_.emplace(r.id, ids_.size()).second) {
      fail(ErrorKind::kValidation, "duplicate class id '" + r.id + "'");
    }
    ids_.push_back(r.id);
    names_.push_back(r.name);
  }
  children_.resize(n);
  parents_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    for (const auto& child : records[i].child_ids) {
      auto it = index_.find(child);
      if (it == index_.end()) {
        fail(ErrorKind::kValidation,
             "class '" + ids_[i] + "' references unknown child id '" + child + "'");
      }
      auto& kids = children_[i];
      if (std::find(kids.begin(), kids.end(), it->second) != kids.end()) {
        fail(ErrorKind::kValidation,
             "class '" + ids_[i] + "' lists child '" + child + "' twice");
      }
      kids.push_back(it->second);
      parents_[it->second].push_back(i);
    }
  }
  if (auto cycle = find_cycle(children_); !cycle.empty()) {
    fail(ErrorKind::kValidation, "cycle in taxonomy: " + describe_cycle(ids_, cycle));
  }

  // Kahn order from the roots; acyclicity guarantees every node is visited.
  path_count_.assign(n, 0);
  depth_.assign(n, -1);
  std::vector<size_t> pending(n);
  std::deque<size_t> queue;
  for (size_t i = 0; i < n; ++i) {
    pending[i] = parents_[i].size();
    if (pending[i] == 0) {
      roots_.push_back(ids_[i]);
      path_count_[i] = 1;
      depth_[i] = 0;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const size_t u = queue.front();
    queue.pop_front();
    for (size_t v : children_[u]) {
      path_count_[v] = std::min(2, path_count_[v] + path_count_[u]);
      if (--pending[v] == 0) {
        if (path_count_[v] == 1) depth_[v] = depth_[parents_[v].front()] + 1;
        queue.push_back(v);
      }
    }
  }
}

bool Taxonomy::contains(std::string_view id) const {
  return index_.count(std::string(id)) > 0;
}

size_t Taxonomy::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) fail(ErrorKind::kLookup, "unknown class id '" + std::string(id) + "'");
  return it->second;
}

size_t Taxonomy::single_path_index(std::string_view id) const {
  const size_t i = index_of(id);
  if (path_count_[i] != 1) {
    fail(ErrorKind::kAmbiguity,
         "class '" + std::string(id) + "' has multiple paths to a root; blacklist it first");
  }
  return i;
}

const std::string& Taxonomy::name(std::string_view id) const { return names_[index_of(id)]; }

std::vector<ClassId> Taxonomy::children(std::string_view id) const {
  std::vector<ClassId> out;
  for (size_t c : children_[index_of(id)]) out.push_back(ids_[c]);
  return out;
}

std::vector<ClassId> Taxonomy::parents(std::string_view id) const {
  std::vector<ClassId> out;
  for (size_t p : parents_[index_of(id)]) out.push_back(ids_[p]);
  return out;
}

bool Taxonomy::is_root(std::string_view id) const { return parents_[index_of(id)].empty(); }

bool Taxonomy::is_single_path(std::string_view id) const {
  return path_count_[index_of(id)] == 1;
}

std::optional<ClassId> Taxonomy::parent_of(std::string_view id) const {
  const size_t i = single_path_index(id);
  if (parents_[i].empty()) return std::nullopt;
  return ids_[parents_[i].front()];
}

int Taxonomy::depth(std::string_view id) const { return depth_[single_path_index(id)]; }

ClassId Taxonomy::root_of(std::string_view id) const {
  size_t i = single_path_index(id);
  while (!parents_[i].empty()) i = parents_[i].front();
  return ids_[i];
}

int Taxonomy::distance(std::string_view a, std::string_view b) const {
  size_t x = single_path_index(a);
  size_t y = single_path_index(b);
  const int da = depth_[x];
  const int db = depth_[y];
  while (depth_[x] > depth_[y]) x = parents_[x].front();
  while (depth_[y] > depth_[x]) y = parents_[y].front();
  while (x != y) {
    if (parents_[x].empty()) return da + db + 2;  // distinct roots
    x = parents_[x].front();
    y = parents_[y].front();
  }
  return da + db - 2 * depth_[x];
}

std::set<ClassId> Taxonomy::multipath_blacklist() const {
  std::set<ClassId> out;
  for (size_t i = 0; i < ids_.size(); ++i) {
    if (path_count_[i] > 1) out.insert(ids_[i]);
  }
  return out;
}

std::set<ClassId> Taxonomy::level_filter(const std::set<int>& keep_depths) const {
  std::set<ClassId> out;
  for (size_t i = 0; i < ids_.size(); ++i) {
    if (path_count_[i] == 1 && keep_depths.count(depth_[i])) out.insert(ids_[i]);
  }
  return out;
}

std::vector<OntologyRecord> Taxonomy::records() const {
  std::vector<OntologyRecord> out;
  out.reserve(ids_.size());
  for (size_t i = 0; i < ids_.size(); ++i) {
    OntologyRecord r{ids_[i], names_[i], {}};
    for (size_t c : children_[i]) r.child_ids.push_back(ids_[c]);
    out.push_back(std::move(r));
  }
  return out;
}

Taxonomy load_taxonomy(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, "ontology: malformed JSON at " + line_column(document, e.byte) +
                                " (byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_array()) fail(ErrorKind::kParse, "ontology: top level must be an array of records");
  std::vector<OntologyRecord> records;
  records.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string where = "ontology: record " + std::to_string(i);
    if (!rec.is_object()) fail(ErrorKind::kParse, where + " is not an object");
    if (!rec.contains("id") || !rec["id"].is_string()) {
      fail(ErrorKind::kParse, where + " has no string field 'id'");
    }
    OntologyRecord r;
    r.id = rec["id"].get<std::string>();
    if (rec.contains("name") && rec["name"].is_string()) r.name = rec["name"].get<std::string>();
    if (rec.contains("child_ids")) {
      const auto& kids = rec["child_ids"];
      if (!kids.is_array()) fail(ErrorKind::kParse, where + " ('" + r.id + "'): child_ids is not an array");
      for (const auto& k : kids) {
        if (!k.is_string()) fail(ErrorKind::kParse, where + " ('" + r.id + "'): non-string child id");
        r.child_ids.push_back(k.get<std::string>());
      }
    }
    records.push_back(std::move(r));
  }
  return Taxonomy(std::move(records));
}

Taxonomy load_taxonomy_file(const std::filesystem::path& path) {
  return load_taxonomy(read_file(path));
}

std::string taxonomy_to_json(const Taxonomy& taxonomy) {
  json doc = json::array();
  for (const auto& r : taxonomy.records()) {
    json rec;
    rec["id"] = r.id;
    rec["name"] = r.name;
    rec["description"] = "";
    rec["child_ids"] = r.child_ids;
    rec["restrictions"] = json::array();
    doc.push_back(std::move(rec));
  }
  return doc.dump(2) + "\n";
}

}  // namespace ladproto
