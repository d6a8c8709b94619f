// FSD50K-shaped metadata CSV and the split manifest format.

#include <algorithm>
#include <map>

#include "common/error.h"
#include "common/io.h"
#include "curation/curation.h"
#include "json.hpp"

namespace ladproto {

using json = nlohmann::json;

namespace {

// RFC 4180 rows: quoted fields, doubled quotes, LF or CRLF line ends.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  size_t line = 1;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          fail(ErrorKind::kParse, "metadata CSV line " + std::to_string(line) +
                                      ": stray quote inside unquoted field");
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        field_started = false;
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) fail(ErrorKind::kParse, "metadata CSV: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

json pool_to_json(const std::vector<ClipRecord>& pool) {
  json arr = json::array();
  for (const auto& r : pool) {
    arr.push_back({{"clip", r.clip_id},
                   {"labels", r.labels},
                   {"source", r.source_split == SourceSplit::kDev ? "dev" : "eval"}});
  }
  return arr;
}

std::vector<ClipRecord> pool_from_json(const json& arr) {
  std::vector<ClipRecord> pool;
  for (const auto& item : arr) {
    ClipRecord r;
    r.clip_id = item.at("clip").get<std::string>();
    r.labels = item.at("labels").get<std::vector<ClassId>>();
    r.source_split = item.value("source", "dev") == "eval" ? SourceSplit::kEval : SourceSplit::kDev;
    pool.push_back(std::move(r));
  }
  return pool;
}

}  // namespace

std::vector<ClipRecord> parse_metadata_csv(std::string_view text, SourceSplit source) {
  const auto rows = parse_csv_rows(text);
  if (rows.empty()) fail(ErrorKind::kParse, "metadata CSV: missing header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int fname = column("fname");
  const int mids = column("mids");
  if (fname < 0 || mids < 0) {
    fail(ErrorKind::kParse, "metadata CSV: header must contain 'fname' and 'mids' columns");
  }
  std::vector<ClipRecord> records;
  records.reserve(rows.size() - 1);
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) {
      fail(ErrorKind::kParse, "metadata CSV row " + std::to_string(i + 1) + ": expected " +
                                  std::to_string(header.size()) + " fields, found " +
                                  std::to_string(row.size()));
    }
    ClipRecord rec;
    rec.clip_id = row[fname];
    rec.source_split = source;
    rec.labels = split_list(row[mids]);
    std::sort(rec.labels.begin(), rec.labels.end());
    rec.labels.erase(std::unique(rec.labels.begin(), rec.labels.end()), rec.labels.end());
    if (rec.clip_id.empty()) fail(ErrorKind::kParse, "metadata CSV row " + std::to_string(i + 1) + ": empty fname");
    if (rec.labels.empty()) {
      fail(ErrorKind::kParse, "metadata CSV row " + std::to_string(i + 1) + " (clip '" +
                                  rec.clip_id + "'): no class ids");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ClipRecord> load_metadata_csv(const std::filesystem::path& path, SourceSplit source) {
  return parse_metadata_csv(read_file(path), source);
}

std::string metadata_to_csv(const std::vector<ClipRecord>& records, const Taxonomy& taxonomy) {
  std::string out = "fname,labels,mids,split\n";
  for (const auto& r : records) {
    std::string names, ids;
    for (size_t i = 0; i < r.labels.size(); ++i) {
      if (i) {
        names += ',';
        ids += ',';
      }
      std::string n = taxonomy.contains(r.labels[i]) ? taxonomy.name(r.labels[i]) : r.labels[i];
      std::replace(n.begin(), n.end(), ' ', '_');
      names += n;
      ids += r.labels[i];
    }
    out += r.clip_id + "," + quote(names) + "," + quote(ids) + "," +
           (r.source_split == SourceSplit::kDev ? "train" : "eval") + "\n";
  }
  return out;
}

std::string manifest_to_json(const CuratedDataset& ds) {
  json doc;
  doc["format"] = "ladproto-split-manifest/1";
  doc["ratio"] = {ds.options.ratio.base, ds.options.ratio.validation, ds.options.ratio.evaluation};
  doc["seed"] = ds.options.seed;
  doc["keep_depths"] = ds.options.keep_depths;
  doc["min_per_class"] = ds.options.min_per_class;
  doc["eligible_count"] = ds.eligible_count;
  doc["raw_sizes"] = ds.raw_sizes;
  doc["classes"] = {{"base", ds.split.base},
                    {"validation", ds.split.validation},
                    {"evaluation", ds.split.evaluation}};
  doc["pools"] = {{"base", pool_to_json(ds.pools.base)},
                  {"validation", pool_to_json(ds.pools.validation)},
                  {"evaluation", pool_to_json(ds.pools.evaluation)}};
  doc["audit"] = {{"overlap", ds.audit.shared_clip_ids}};
  return doc.dump(2) + "\n";
}

CuratedDataset manifest_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, "split manifest: malformed JSON at byte " + std::to_string(e.byte));
  }
  try {
    if (doc.at("format") != "ladproto-split-manifest/1") {
      fail(ErrorKind::kParse, "split manifest: unsupported format tag");
    }
    CuratedDataset ds;
    const auto ratio = doc.at("ratio").get<std::vector<double>>();
    if (ratio.size() != 3) fail(ErrorKind::kParse, "split manifest: ratio must have three parts");
    ds.options.ratio = {ratio[0], ratio[1], ratio[2]};
    ds.options.seed = doc.at("seed").get<uint64_t>();
    ds.options.keep_depths = doc.at("keep_depths").get<std::set<int>>();
    ds.options.min_per_class = doc.at("min_per_class").get<int>();
    ds.eligible_count = doc.at("eligible_count").get<size_t>();
    ds.raw_sizes = doc.at("raw_sizes").get<std::array<size_t, 3>>();
    const auto& classes = doc.at("classes");
    ds.split.base = classes.at("base").get<std::set<ClassId>>();
    ds.split.validation = classes.at("validation").get<std::set<ClassId>>();
    ds.split.evaluation = classes.at("evaluation").get<std::set<ClassId>>();
    const auto& pools = doc.at("pools");
    ds.pools.base = pool_from_json(pools.at("base"));
    ds.pools.validation = pool_from_json(pools.at("validation"));
    ds.pools.evaluation = pool_from_json(pools.at("evaluation"));
    ds.audit.shared_clip_ids = doc.at("audit").at("overlap").get<std::vector<std::string>>();
    return ds;
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("split manifest: ") + e.what());
  }
}

}  // namespace ladproto
