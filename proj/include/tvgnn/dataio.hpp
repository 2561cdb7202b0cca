#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#elif __has_include("json.hpp")
#include "json.hpp"
#else
#error "nlohmann/json is required: install nlohmann-json3-dev or drop json.hpp into vendor/"
#endif

#include "tvgnn/common.hpp"
#include "tvgnn/dense.hpp"
#include "tvgnn/graph.hpp"

namespace tvgnn {

struct DatasetMeta {
  std::string name;
  int num_nodes = 0;
  int num_edges = 0;  // undirected edge count
  int num_features = 0;
  int num_classes = 0;
  std::vector<std::string> class_names;
};

// On-disk layout of a canonical dataset directory:
//   meta.json      counts and class names
//   edges.tsv      one "src<TAB>dst" line per undirected edge, src < dst, sorted
//   labels.tsv     one class index per line, line i labels node i
//   features.bin   row-major float32 node features (features.tsv with one
//                  tab-separated row per node is accepted when reading)
struct CanonicalDataset {
  DatasetMeta meta;
  Graph graph;
  DenseMatrix features;
};

struct IngestReport {
  CanonicalDataset dataset;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

inline int parse_int(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    require(pos == s.size(), what + ": trailing characters in '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(what + ": cannot parse integer from '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    require(pos == s.size(), what + ": trailing characters in '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(what + ": cannot parse number from '" + s + "'");
  }
}

// Undirected edge accumulator: symmetrizes, drops self-loops and duplicates.
struct EdgeSet {
  std::set<std::pair<int, int>> pairs;
  int self_loops = 0;
  int duplicates = 0;

  void add(int u, int v) {
    if (u == v) {
      ++self_loops;
      return;
    }
    const auto p = std::minmax(u, v);
    if (!pairs.emplace(p.first, p.second).second) ++duplicates;
  }

  std::vector<std::pair<int, int>> sorted() const {
    return std::vector<std::pair<int, int>>(pairs.begin(), pairs.end());
  }
};

}  // namespace detail

inline void save_dataset(const std::string& dir, const CanonicalDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Graph& g = ds.graph;
  require(ds.meta.num_nodes == g.n && ds.meta.num_edges == g.num_edges(),
          "save_dataset: meta counts disagree with the graph");
  require(ds.features.rows == g.n && ds.features.cols == ds.meta.num_features,
          "save_dataset: feature matrix is " + shape_str(ds.features.rows, ds.features.cols));
  require(static_cast<int>(ds.meta.class_names.size()) == ds.meta.num_classes,
          "save_dataset: class name count disagrees with num_classes");

  nlohmann::ordered_json meta;
  meta["name"] = ds.meta.name;
  meta["num_nodes"] = ds.meta.num_nodes;
  meta["num_edges"] = ds.meta.num_edges;
  meta["num_features"] = ds.meta.num_features;
  meta["num_classes"] = ds.meta.num_classes;
  meta["class_names"] = ds.meta.class_names;
  {
    std::ofstream out(fs::path(dir) / "meta.json");
    require(out.good(), "cannot write meta.json in " + dir);
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "edges.tsv");
    require(out.good(), "cannot write edges.tsv in " + dir);
    for (int i = 0; i < g.n; ++i)
      for (int e = g.adj.row_ptr[i]; e < g.adj.row_ptr[static_cast<size_t>(i) + 1]; ++e)
        if (i < g.adj.col_idx[e]) out << i << '\t' << g.adj.col_idx[e] << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "labels.tsv");
    require(out.good(), "cannot write labels.tsv in " + dir);
    for (int l : g.labels) out << l << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "features.bin", std::ios::binary);
    require(out.good(), "cannot write features.bin in " + dir);
    std::vector<float> buf(ds.features.v.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(ds.features.v[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

inline CanonicalDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "dataset directory not found: " + dir);

  CanonicalDataset ds;
  {
    std::ifstream in(fs::path(dir) / "meta.json");
    require(in.good(), "cannot open meta.json in " + dir);
    nlohmann::json meta;
    try {
      in >> meta;
    } catch (const std::exception& e) {
      fail("meta.json in " + dir + " is not valid JSON: " + e.what());
    }
    for (const char* key :
         {"name", "num_nodes", "num_edges", "num_features", "num_classes", "class_names"})
      require(meta.contains(key), "meta.json is missing '" + std::string(key) + "'");
    ds.meta.name = meta["name"].get<std::string>();
    ds.meta.num_nodes = meta["num_nodes"].get<int>();
    ds.meta.num_edges = meta["num_edges"].get<int>();
    ds.meta.num_features = meta["num_features"].get<int>();
    ds.meta.num_classes = meta["num_classes"].get<int>();
    ds.meta.class_names = meta["class_names"].get<std::vector<std::string>>();
  }
  const int n = ds.meta.num_nodes;
  require(n >= 1, "meta.json: num_nodes must be positive");
  require(static_cast<int>(ds.meta.class_names.size()) == ds.meta.num_classes,
          "meta.json: class_names count disagrees with num_classes");

  std::vector<std::pair<int, int>> edges;
  for (const std::string& line : detail::read_lines((fs::path(dir) / "edges.tsv").string())) {
    if (line.empty()) continue;
    const auto f = detail::split_on(line, '\t');
    require(f.size() == 2, "edges.tsv: expected 'src<TAB>dst', got '" + line + "'");
    const int u = detail::parse_int(f[0], "edges.tsv");
    const int v = detail::parse_int(f[1], "edges.tsv");
    require(u < v, "edges.tsv: edges must satisfy src < dst, got " + line);
    edges.emplace_back(u, v);
  }
  require(static_cast<int>(edges.size()) == ds.meta.num_edges,
          "edges.tsv holds " + std::to_string(edges.size()) + " edges, meta.json says " +
              std::to_string(ds.meta.num_edges));

  std::vector<int> labels;
  for (const std::string& line : detail::read_lines((fs::path(dir) / "labels.tsv").string())) {
    if (line.empty()) continue;
    labels.push_back(detail::parse_int(line, "labels.tsv"));
  }
  require(static_cast<int>(labels.size()) == n, "labels.tsv holds " +
                                                    std::to_string(labels.size()) +
                                                    " labels for " + std::to_string(n) +
                                                    " nodes");

  const int f = ds.meta.num_features;
  ds.features = DenseMatrix(n, f);
  const fs::path bin_path = fs::path(dir) / "features.bin";
  const fs::path tsv_path = fs::path(dir) / "features.tsv";
  if (fs::exists(bin_path)) {
    std::ifstream in(bin_path, std::ios::binary);
    require(in.good(), "cannot open features.bin in " + dir);
    const auto expected = static_cast<std::uintmax_t>(n) * f * sizeof(float);
    require(fs::file_size(bin_path) == expected,
            "features.bin has " + std::to_string(fs::file_size(bin_path)) + " bytes, expected " +
                std::to_string(expected));
    std::vector<float> buf(static_cast<size_t>(n) * f);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    require(in.gcount() == static_cast<std::streamsize>(buf.size() * sizeof(float)),
            "features.bin: short read");
    for (size_t i = 0; i < buf.size(); ++i) ds.features.v[i] = buf[i];
  } else if (fs::exists(tsv_path)) {
    const auto lines = detail::read_lines(tsv_path.string());
    int row = 0;
    for (const std::string& line : lines) {
      if (line.empty()) continue;
      require(row < n, "features.tsv has more than " + std::to_string(n) + " rows");
      const auto cells = detail::split_on(line, '\t');
      require(static_cast<int>(cells.size()) == f,
              "features.tsv row " + std::to_string(row) + " has " +
                  std::to_string(cells.size()) + " columns, expected " + std::to_string(f));
      for (int j = 0; j < f; ++j)
        ds.features(row, j) = detail::parse_double(cells[j], "features.tsv");
      ++row;
    }
    require(row == n, "features.tsv has " + std::to_string(row) + " rows for " +
                          std::to_string(n) + " nodes");
  } else {
    fail("neither features.bin nor features.tsv found in " + dir);
  }

  ds.graph = Graph::create(n, edges, std::move(labels), ds.meta.num_classes);
  require(ds.graph.num_edges() == ds.meta.num_edges,
          "edges.tsv contains duplicate edges");
  return ds;
}

namespace detail {

// Assembles the canonical dataset from parsed parts, optionally restricting
// to the largest connected component (citation corpora convention).
inline CanonicalDataset finish_ingest(std::string name, const EdgeSet& edges,
                                      DenseMatrix features, std::vector<int> labels,
                                      std::vector<std::string> class_names, bool keep_lcc,
                                      std::vector<std::string>& warnings) {
  const int n = features.rows;
  Graph full = Graph::create(n, edges.sorted(), std::move(labels),
                             static_cast<int>(class_names.size()));
  if (edges.self_loops > 0)
    warnings.push_back("dropped " + std::to_string(edges.self_loops) + " self-loop edge(s)");
  if (edges.duplicates > 0)
    warnings.push_back("merged " + std::to_string(edges.duplicates) +
                       " duplicate/reciprocal edge(s)");

  CanonicalDataset ds;
  if (keep_lcc) {
    ComponentResult lcc = largest_connected_component(full);
    if (lcc.graph.n < full.n)
      warnings.push_back("kept largest connected component: " + std::to_string(lcc.graph.n) +
                         " of " + std::to_string(full.n) + " nodes");
    DenseMatrix kept_feat(lcc.graph.n, features.cols);
    for (int i = 0; i < lcc.graph.n; ++i) {
      const double* src = features.row(lcc.kept[i]);
      std::copy(src, src + features.cols, kept_feat.row(i));
    }
    ds.graph = std::move(lcc.graph);
    ds.features = std::move(kept_feat);
  } else {
    ds.graph = std::move(full);
    ds.features = std::move(features);
  }
  ds.meta.name = std::move(name);
  ds.meta.num_nodes = ds.graph.n;
  ds.meta.num_edges = ds.graph.num_edges();
  ds.meta.num_features = ds.features.cols;
  ds.meta.num_classes = ds.graph.num_classes;
  ds.meta.class_names = std::move(class_names);
  return ds;
}

}  // namespace detail

// Citation corpus in .content/.cites form. Each content line is
//   <paper_id> <TAB> <0/1 word flags...> <TAB> <class_name>
// and each cites line names two paper ids. Citation direction is discarded,
// references to unknown papers are dropped, and the largest connected
// component is kept. Classes are indexed in sorted name order; nodes keep
// their content-file order.
inline IngestReport ingest_content_cites(const std::string& name,
                                         const std::string& content_path,
                                         const std::string& cites_path) {
  IngestReport report;
  const auto content = detail::read_lines(content_path);
  std::vector<std::vector<std::string>> rows;
  for (const std::string& line : content) {
    if (line.empty()) continue;
    auto fields = detail::split_on(line, '\t');
    if (fields.size() < 3) fields = detail::split_ws(line);
    require(fields.size() >= 3, content_path + ": malformed line '" + line.substr(0, 60) + "'");
    rows.push_back(std::move(fields));
  }
  require(!rows.empty(), content_path + ": no records");
  const int f = static_cast<int>(rows.front().size()) - 2;
  require(f >= 1, content_path + ": no feature columns");

  std::unordered_map<std::string, int> id_of;
  std::set<std::string> class_set;
  for (const auto& fields : rows) {
    require(static_cast<int>(fields.size()) == f + 2,
            content_path + ": inconsistent column count for record '" + fields.front() + "'");
    require(id_of.emplace(fields.front(), static_cast<int>(id_of.size())).second,
            content_path + ": duplicate record id '" + fields.front() + "'");
    class_set.insert(fields.back());
  }
  std::vector<std::string> class_names(class_set.begin(), class_set.end());
  std::map<std::string, int> class_of;
  for (int c = 0; c < static_cast<int>(class_names.size()); ++c)
    class_of[class_names[c]] = c;

  const int n = static_cast<int>(rows.size());
  DenseMatrix features(n, f);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const auto& fields = rows[i];
    for (int j = 0; j < f; ++j)
      features(i, j) = detail::parse_double(fields[j + 1], content_path);
    labels[i] = class_of.at(fields.back());
  }

  detail::EdgeSet edges;
  int dangling = 0;
  for (const std::string& line : detail::read_lines(cites_path)) {
    if (line.empty()) continue;
    auto ends = detail::split_on(line, '\t');
    if (ends.size() != 2) ends = detail::split_ws(line);
    require(ends.size() == 2, cites_path + ": malformed line '" + line.substr(0, 60) + "'");
    const auto a = id_of.find(ends[0]);
    const auto b = id_of.find(ends[1]);
    if (a == id_of.end() || b == id_of.end()) {
      ++dangling;
      continue;
    }
    edges.add(a->second, b->second);
  }
  if (dangling > 0)
    report.warnings.push_back("dropped " + std::to_string(dangling) +
                              " citation(s) to papers outside the corpus");

  report.dataset = detail::finish_ingest(name, edges, std::move(features), std::move(labels),
                                         std::move(class_names), /*keep_lcc=*/true,
                                         report.warnings);
  return report;
}

// Web page datasets given as a node table and a directed edge list. Node
// lines are either
//   <id> <TAB> <comma-separated feature indices> <TAB> <label>
// or the .content layout with explicit 0/1 feature columns. Edges are
// symmetrized and the whole graph is kept (these corpora are small and
// disconnected pieces are part of the benchmark).
inline IngestReport ingest_webkb(const std::string& name, const std::string& node_path,
                                 const std::string& edge_path) {
  IngestReport report;
  std::vector<std::string> node_lines;
  for (const std::string& line : detail::read_lines(node_path))
    if (!line.empty()) node_lines.push_back(line);
  require(!node_lines.empty(), node_path + ": no records");

  // An optional header line ("node_id ...") is skipped.
  size_t first = 0;
  {
    const auto fields = detail::split_on(node_lines[0], '\t');
    if (!fields.empty() && fields.front() == "node_id") first = 1;
  }
  require(first < node_lines.size(), node_path + ": no records after header");

  const bool index_mode = detail::split_on(node_lines[first], '\t').size() == 3;

  std::unordered_map<std::string, int> id_of;
  std::vector<std::vector<int>> index_rows;     // index mode
  std::vector<std::vector<double>> dense_rows;  // content mode
  std::vector<std::string> label_strings;
  int max_index = -1;
  int dense_cols = -1;
  for (size_t li = first; li < node_lines.size(); ++li) {
    const std::string& line = node_lines[li];
    const auto fields = detail::split_on(line, '\t');
    require(fields.size() >= 3, node_path + ": malformed line '" + line.substr(0, 60) + "'");
    require(id_of.emplace(fields.front(), static_cast<int>(id_of.size())).second,
            node_path + ": duplicate record id '" + fields.front() + "'");
    if (index_mode) {
      require(fields.size() == 3, node_path + ": expected 3 columns in line '" +
                                      line.substr(0, 60) + "'");
      std::vector<int> idx;
      for (const std::string& tok : detail::split_on(fields[1], ',')) {
        if (tok.empty()) continue;
        idx.push_back(detail::parse_int(tok, node_path));
        require(idx.back() >= 0, node_path + ": negative feature index");
        max_index = std::max(max_index, idx.back());
      }
      index_rows.push_back(std::move(idx));
    } else {
      const int cols = static_cast<int>(fields.size()) - 2;
      if (dense_cols < 0) dense_cols = cols;
      require(cols == dense_cols, node_path + ": inconsistent column count for record '" +
                                      fields.front() + "'");
      std::vector<double> row(static_cast<size_t>(cols));
      for (int j = 0; j < cols; ++j) row[j] = detail::parse_double(fields[j + 1], node_path);
      dense_rows.push_back(std::move(row));
    }
    label_strings.push_back(fields.back());
  }

  std::set<std::string> class_set(label_strings.begin(), label_strings.end());
  std::vector<std::string> class_names(class_set.begin(), class_set.end());
  std::map<std::string, int> class_of;
  for (int c = 0; c < static_cast<int>(class_names.size()); ++c)
    class_of[class_names[c]] = c;

  const int n = static_cast<int>(label_strings.size());
  const int f = index_mode ? max_index + 1 : dense_cols;
  require(f >= 1, node_path + ": no features found");
  DenseMatrix features = DenseMatrix::zeros(n, f);
  for (int i = 0; i < n; ++i) {
    if (index_mode)
      for (int j : index_rows[i]) features(i, j) = 1.0;
    else
      std::copy(dense_rows[i].begin(), dense_rows[i].end(), features.row(i));
  }
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = class_of.at(label_strings[i]);

  detail::EdgeSet edges;
  bool skipped_header = false;
  const auto edge_lines = detail::read_lines(edge_path);
  for (size_t li = 0; li < edge_lines.size(); ++li) {
    const std::string& line = edge_lines[li];
    if (line.empty()) continue;
    auto ends = detail::split_on(line, '\t');
    if (ends.size() != 2) ends = detail::split_ws(line);
    require(ends.size() == 2, edge_path + ": malformed line '" + line.substr(0, 60) + "'");
    const auto a = id_of.find(ends[0]);
    const auto b = id_of.find(ends[1]);
    if (a == id_of.end() || b == id_of.end()) {
      require(li == 0 && !skipped_header,
              edge_path + ": unknown node in edge '" + line.substr(0, 60) + "'");
      skipped_header = true;
      continue;
    }
    edges.add(a->second, b->second);
  }

  report.dataset = detail::finish_ingest(name, edges, std::move(features), std::move(labels),
                                         std::move(class_names), /*keep_lcc=*/false,
                                         report.warnings);
  return report;
}

// PubMed diabetes corpus. The node table starts with two schema lines, the
// second of which declares the TF-IDF vocabulary as "w-<word>=..." fields in
// feature order. Node lines carry "label=<k>" and sparse "w-<word>=<value>"
// fields. The citation table starts with two header lines and references
// papers as "paper:<id>" tokens. The largest connected component is kept.
inline IngestReport ingest_pubmed(const std::string& name, const std::string& node_path,
                                  const std::string& cites_path) {
  IngestReport report;
  const auto node_lines = detail::read_lines(node_path);
  require(node_lines.size() >= 3, node_path + ": expected two schema lines and records");

  std::unordered_map<std::string, int> word_col;
  for (const std::string& tok : detail::split_ws(node_lines[1])) {
    const size_t eq = tok.find('=');
    const std::string key = eq == std::string::npos ? tok : tok.substr(0, eq);
    if (key.rfind("w-", 0) == 0)
      word_col.emplace(key, static_cast<int>(word_col.size()));
  }
  require(!word_col.empty(), node_path + ": schema line declares no w- vocabulary");
  const int f = static_cast<int>(word_col.size());

  std::unordered_map<std::string, int> id_of;
  std::vector<std::vector<std::pair<int, double>>> feat_rows;
  std::vector<std::string> label_strings;
  for (size_t li = 2; li < node_lines.size(); ++li) {
    const std::string& line = node_lines[li];
    if (line.empty()) continue;
    const auto fields = detail::split_on(line, '\t');
    require(fields.size() >= 2, node_path + ": malformed line '" + line.substr(0, 60) + "'");
    require(id_of.emplace(fields.front(), static_cast<int>(id_of.size())).second,
            node_path + ": duplicate record id '" + fields.front() + "'");
    std::string label;
    std::vector<std::pair<int, double>> feats;
    for (size_t i = 1; i < fields.size(); ++i) {
      const std::string& tok = fields[i];
      if (tok.empty()) continue;
      const size_t eq = tok.find('=');
      require(eq != std::string::npos, node_path + ": malformed field '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      if (key == "label") {
        label = tok.substr(eq + 1);
      } else if (key.rfind("w-", 0) == 0) {
        const auto it = word_col.find(key);
        require(it != word_col.end(), node_path + ": word '" + key + "' missing from schema");
        feats.emplace_back(it->second, detail::parse_double(tok.substr(eq + 1), node_path));
      }  // "summary" and anything else is ignored
    }
    require(!label.empty(), node_path + ": record '" + fields.front() + "' has no label");
    label_strings.push_back(label);
    feat_rows.push_back(std::move(feats));
  }
  const int n = static_cast<int>(label_strings.size());
  require(n >= 1, node_path + ": no records");

  std::set<std::string> class_set(label_strings.begin(), label_strings.end());
  std::vector<std::string> class_names(class_set.begin(), class_set.end());
  std::map<std::string, int> class_of;
  for (int c = 0; c < static_cast<int>(class_names.size()); ++c)
    class_of[class_names[c]] = c;

  DenseMatrix features = DenseMatrix::zeros(n, f);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    for (const auto& [col, value] : feat_rows[i]) features(i, col) = value;
    labels[i] = class_of.at(label_strings[i]);
  }

  detail::EdgeSet edges;
  int dangling = 0;
  const auto cite_lines = detail::read_lines(cites_path);
  for (size_t li = 2; li < cite_lines.size(); ++li) {
    const std::string& line = cite_lines[li];
    if (line.empty()) continue;
    std::vector<std::string> papers;
    for (const std::string& tok : detail::split_ws(line))
      if (tok.rfind("paper:", 0) == 0) papers.push_back(tok.substr(6));
    require(papers.size() == 2,
            cites_path + ": expected two paper refs in '" + line.substr(0, 60) + "'");
    const auto a = id_of.find(papers[0]);
    const auto b = id_of.find(papers[1]);
    if (a == id_of.end() || b == id_of.end()) {
      ++dangling;
      continue;
    }
    edges.add(a->second, b->second);
  }
  if (dangling > 0)
    report.warnings.push_back("dropped " + std::to_string(dangling) +
                              " citation(s) to papers outside the corpus");

  report.dataset = detail::finish_ingest(name, edges, std::move(features), std::move(labels),
                                         std::move(class_names), /*keep_lcc=*/true,
                                         report.warnings);
  return report;
}

// Reference shapes of the published benchmark corpora, used by `stats` to
// flag ingestion drift.
struct DatasetExpectation {
  int num_nodes, num_edges, num_features, num_classes;
};

inline const std::map<std::string, DatasetExpectation>& known_datasets() {
  static const std::map<std::string, DatasetExpectation> table = {
      {"cora", {2485, 5069, 1433, 7}},      {"citeseer", {2120, 3679, 3703, 6}},
      {"pubmed", {19717, 44324, 500, 3}},   {"cornell", {183, 295, 1703, 5}},
      {"texas", {183, 309, 1703, 5}},       {"wisconsin", {251, 499, 1703, 5}},
  };
  return table;
}

inline std::string dataset_stats(const CanonicalDataset& ds) {
  const Graph& g = ds.graph;
  std::ostringstream out;
  out << "dataset " << ds.meta.name << "\n";
  out << "  nodes    " << g.n << "\n";
  out << "  edges    " << g.num_edges() << "\n";
  out << "  features " << ds.meta.num_features << "\n";
  out << "  classes  " << ds.meta.num_classes << "\n";

  int min_deg = g.n == 0 ? 0 : g.adj.rows, max_deg = 0;
  long total_deg = 0;
  for (int i = 0; i < g.n; ++i) {
    const int d = g.adj.row_ptr[static_cast<size_t>(i) + 1] - g.adj.row_ptr[i];
    min_deg = std::min(min_deg, d);
    max_deg = std::max(max_deg, d);
    total_deg += d;
  }
  out << "  degree   min " << min_deg << ", mean "
      << (g.n > 0 ? static_cast<double>(total_deg) / g.n : 0.0) << ", max " << max_deg << "\n";

  std::vector<int> hist(static_cast<size_t>(ds.meta.num_classes), 0);
  for (int l : g.labels) ++hist[l];
  for (int c = 0; c < ds.meta.num_classes; ++c)
    out << "  class " << c << "  " << hist[c] << "  (" << ds.meta.class_names[c] << ")\n";

  const auto it = known_datasets().find(ds.meta.name);
  if (it != known_datasets().end()) {
    const DatasetExpectation& e = it->second;
    if (g.n != e.num_nodes || g.num_edges() != e.num_edges ||
        ds.meta.num_features != e.num_features || ds.meta.num_classes != e.num_classes)
      out << "  WARNING: expected " << e.num_nodes << " nodes / " << e.num_edges << " edges / "
          << e.num_features << " features / " << e.num_classes << " classes for "
          << ds.meta.name << "\n";
    else
      out << "  matches the published corpus shape\n";
  }
  return out.str();
}

}  // namespace tvgnn
