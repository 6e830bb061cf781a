#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "segia/error.hpp"
#include "segia/graph.hpp"

namespace segia {

namespace {

std::string where(const std::filesystem::path& p, std::size_t line) {
  return p.filename().string() + ":" + std::to_string(line);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParseError("cannot open " + p.string());
  return in;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

Matrix read_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (blank(line)) continue;
    auto fields = split_commas(line);
    if (rows == 0) {
      cols = fields.size();
    } else if (fields.size() != cols) {
      throw DimensionError(where(path, ln) + ": expected " + std::to_string(cols) + " feature columns, found " +
                           std::to_string(fields.size()));
    }
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_number(f, v)) throw ParseError(where(path, ln) + ": malformed decimal '" + std::string(f) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  Matrix x(rows, cols);
  x.values() = std::move(values);
  return x;
}

std::vector<Edge> read_edges(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Edge> edges;
  std::string line;
  bool header_seen = false;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (blank(line)) continue;
    auto fields = split_commas(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 2 && fields[0] == "src" && fields[1] == "dst") continue;
      throw ParseError(where(path, ln) + ": expected header 'src,dst'");
    }
    node_t u = 0;
    node_t v = 0;
    if (fields.size() != 2 || !parse_number(fields[0], u) || !parse_number(fields[1], v)) {
      throw ParseError(where(path, ln) + ": expected two non-negative integer node ids");
    }
    edges.push_back({u, v});
  }
  return edges;
}

std::vector<int> read_labels(const std::filesystem::path& path, std::size_t n_nodes) {
  auto in = open_in(path);
  std::vector<int> labels(n_nodes, -1);
  std::string line;
  bool header_seen = false;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (blank(line)) continue;
    auto fields = split_commas(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 2 && fields[0] == "node" && fields[1] == "label") continue;
      throw ParseError(where(path, ln) + ": expected header 'node,label'");
    }
    std::size_t node = 0;
    int label = 0;
    if (fields.size() != 2 || !parse_number(fields[0], node) || !parse_number(fields[1], label)) {
      throw ParseError(where(path, ln) + ": expected 'node,label' integers");
    }
    if (node >= n_nodes) throw ValidationError(where(path, ln) + ": node " + std::to_string(node) + " out of range");
    if (label < 0) throw ValidationError(where(path, ln) + ": negative label");
    labels[node] = label;
  }
  for (std::size_t u = 0; u < n_nodes; ++u) {
    if (labels[u] < 0) throw ValidationError(path.filename().string() + ": node " + std::to_string(u) + " has no label");
  }
  return labels;
}

std::pair<std::vector<node_t>, std::vector<node_t>> read_splits(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
    return {j.at("labeled").get<std::vector<node_t>>(), j.at("targets").get<std::vector<node_t>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
}

}  // namespace

GraphFiles GraphFiles::in(const std::filesystem::path& dir) {
  return {dir / "edges.csv", dir / "features.csv", dir / "labels.csv", dir / "splits.json"};
}

AttributedGraph load_graph(const GraphFiles& files, std::optional<std::size_t> n_classes) {
  Matrix x = read_features(files.features);
  const std::size_t n = x.rows();
  auto edges = read_edges(files.edges);
  auto labels = read_labels(files.labels, n);
  auto [labeled, targets] = read_splits(files.splits);
  std::vector<std::string> warnings;
  Topology topology(n, edges, &warnings);
  return AttributedGraph::build(std::move(topology), std::move(x), std::move(labels), std::move(labeled),
                                std::move(targets), n_classes, std::move(warnings));
}

void save_graph(const AttributedGraph& g, const GraphFiles& files) {
  auto open_out = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    return out;
  };
  {
    auto out = open_out(files.edges);
    out << "src,dst\n";
    for (const Edge& e : g.topology().edges()) out << e.u << ',' << e.v << '\n';
  }
  {
    auto out = open_out(files.features);
    char buf[32];
    for (std::size_t r = 0; r < g.features().rows(); ++r) {
      auto row = g.features().row(r);
      for (std::size_t d = 0; d < row.size(); ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
        if (d) out << ',';
        out << buf;
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(files.labels);
    out << "node,label\n";
    for (std::size_t u = 0; u < g.n_nodes(); ++u) out << u << ',' << g.labels()[u] << '\n';
  }
  {
    auto out = open_out(files.splits);
    nlohmann::json j{{"labeled", g.labeled()}, {"targets", g.targets()}};
    out << j.dump() << '\n';
  }
}

}  // namespace segia
