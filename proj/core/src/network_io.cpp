#include "understudy/network_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace understudy {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

DiscreteBayesNet parse_network(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("network file is not valid JSON: ") + e.what());
  }
  try {
    std::vector<VariableSpec> variables;
    for (const auto& v : doc.at("variables")) {
      variables.push_back({v.at("name").get<std::string>(),
                           v.at("states").get<std::vector<std::string>>()});
    }
    std::vector<NamedEdge> edges;
    for (const auto& e : doc.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) throw NetworkError("edge must be a [parent, child] pair");
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    std::vector<CptSpec> cpts;
    for (const auto& c : doc.at("cpts")) {
      cpts.push_back({c.at("variable").get<std::string>(),
                      c.value("parents", std::vector<std::string>{}),
                      c.at("rows").get<std::vector<std::vector<double>>>()});
    }
    return DiscreteBayesNet::build(std::move(variables), edges, cpts);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("malformed network file: ") + e.what());
  }
}

DiscreteBayesNet load_network(const std::filesystem::path& path) {
  return parse_network(read_text_file(path));
}

std::string network_to_json(const DiscreteBayesNet& net) {
  const Dag& dag = net.dag();
  json doc;
  doc["variables"] = json::array();
  for (const auto& v : dag.variables()) {
    doc["variables"].push_back({{"name", v.name}, {"states", v.states}});
  }
  doc["edges"] = json::array();
  for (const auto& [p, c] : dag.edges()) {
    doc["edges"].push_back({dag.variable(p).name, dag.variable(c).name});
  }
  doc["cpts"] = json::array();
  for (const auto& cpt : net.cpts()) {
    json parents = json::array();
    for (std::size_t p : cpt.parents) parents.push_back(dag.variable(p).name);
    json rows = json::array();
    for (std::size_t r = 0; r < cpt.row_count(); ++r) {
      auto row = cpt.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["cpts"].push_back(
        {{"variable", dag.variable(cpt.variable).name}, {"parents", parents}, {"rows", rows}});
  }
  return doc.dump(2) + "\n";
}

void save_network(const DiscreteBayesNet& net, const std::filesystem::path& path) {
  write_text_file(path, network_to_json(net));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_dataset_csv(const Dag& dag, const Dataset& data, std::ostream& out) {
  for (std::size_t i = 0; i < dag.size(); ++i) out << (i ? "," : "") << dag.variable(i).name;
  out << '\n';
  for (const auto& record : data.records) {
    for (std::size_t i = 0; i < dag.size(); ++i) {
      out << (i ? "," : "") << dag.variable(i).states.at(static_cast<std::size_t>(record.at(i)));
    }
    out << '\n';
  }
}

Dataset read_dataset_csv(const Dag& dag, std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset CSV is empty");
  const auto header = split_csv_line(line);
  std::vector<std::size_t> column_var;
  std::vector<bool> seen(dag.size(), false);
  for (const auto& name : header) {
    const std::size_t v = dag.index_of(name);
    if (seen[v]) throw std::runtime_error("dataset CSV repeats column '" + name + "'");
    seen[v] = true;
    column_var.push_back(v);
  }
  for (std::size_t v = 0; v < dag.size(); ++v) {
    if (!seen[v]) {
      throw std::runtime_error("dataset CSV lacks column '" + dag.variable(v).name + "'");
    }
  }
  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != column_var.size()) {
      throw std::runtime_error("dataset CSV line " + std::to_string(line_no) +
                               " has the wrong number of cells");
    }
    Assignment record(dag.size(), kUnobserved);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::size_t v = column_var[c];
      record[v] = static_cast<int>(dag.variable(v).state_index(cells[c]));
    }
    data.records.push_back(std::move(record));
  }
  return data;
}

void save_dataset(const Dag& dag, const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_dataset_csv(dag, data, ss);
  write_text_file(path, ss.str());
}

Dataset load_dataset(const Dag& dag, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_dataset_csv(dag, in);
}

}  // namespace understudy
