#include "qhmm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qhmm/errors.hpp"

namespace qhmm {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "cannot parse number '" + s + "' in " + where);
  }
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "cannot parse integer '" + s + "' in " + where);
  }
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (header[j] == name) return j;
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (first) {
      table.header = cells;
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        fail(ErrorCode::ParseError,
             path + ": row has " + std::to_string(cells.size()) +
                 " cells, header has " + std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) fail(ErrorCode::ParseError, path + ": empty file");
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    out << header[j] << (j + 1 < header.size() ? "," : "\n");
  }
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << row[j] << (j + 1 < row.size() ? "," : "\n");
    }
  }
}

PanelDataset read_panel_csv(const std::string& path,
                            const std::vector<std::string>& x_cols,
                            const std::vector<std::string>& z_cols,
                            const std::vector<std::string>& w_cols) {
  CsvTable table = read_csv(path);
  int unit_col = table.column("unit");
  int time_col = table.column("time");
  int y_col = table.column("y");
  if (unit_col < 0 || time_col < 0 || y_col < 0) {
    fail(ErrorCode::ParseError,
         path + ": header must contain unit,time,y columns");
  }
  auto resolve = [&](const std::vector<std::string>& names,
                     const char* block) {
    std::vector<int> cols;
    for (const auto& nm : names) {
      int c = table.column(nm);
      if (c < 0) {
        fail(ErrorCode::ParseError, path + ": declared " + block + " column '" +
                                        nm + "' not found in header");
      }
      cols.push_back(c);
    }
    return cols;
  };
  std::vector<int> xc = resolve(x_cols, "x");
  std::vector<int> zc = resolve(z_cols, "z");
  std::vector<int> wc = resolve(w_cols, "w");

  std::vector<PanelRecord> records;
  records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    PanelRecord rec;
    rec.unit_id = row[unit_col];
    rec.time = parse_int(row[time_col], path);
    rec.y = parse_double(row[y_col], path);
    for (int c : xc) rec.x.push_back(parse_double(row[c], path));
    for (int c : zc) rec.z.push_back(parse_double(row[c], path));
    for (int c : wc) rec.w.push_back(parse_double(row[c], path));
    records.push_back(std::move(rec));
  }
  return validate_dataset(std::move(records), x_cols, z_cols, w_cols);
}

void write_panel_csv(const std::string& path, const PanelDataset& data) {
  // all distinct covariate columns once, by name
  std::vector<std::string> cov_names;
  auto add_names = [&](const std::vector<std::string>& names) {
    for (const auto& nm : names) {
      if (std::find(cov_names.begin(), cov_names.end(), nm) == cov_names.end()) {
        cov_names.push_back(nm);
      }
    }
  };
  add_names(data.x_names());
  add_names(data.z_names());
  add_names(data.w_names());

  std::vector<std::string> header = {"unit", "time", "y"};
  header.insert(header.end(), cov_names.begin(), cov_names.end());

  auto value_of = [&](int obs, const std::string& nm) -> std::optional<double> {
    for (int j = 0; j < data.p(); ++j) {
      if (data.x_names()[j] == nm) return data.X()(obs, j);
    }
    for (int j = 0; j < data.r(); ++j) {
      if (data.z_names()[j] == nm) return data.Z()(obs, j);
    }
    for (int j = 0; j < data.d(); ++j) {
      if (data.w_names()[j] == nm) return data.W()(obs, j);
    }
    return std::nullopt;
  };

  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < data.n_units(); ++i) {
    for (int t = 1; t <= data.T(i); ++t) {
      int obs = data.obs_index(i, t);
      std::vector<std::string> row = {data.unit_id(i), std::to_string(t),
                                      format_double(data.y(obs))};
      for (const auto& nm : cov_names) {
        row.push_back(format_double(*value_of(obs, nm)));
      }
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

KvDocument parse_kv(const std::string& text) {
  KvDocument doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ParseError,
           "kv line " + std::to_string(lineno) + " has no '=': " + line);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      fail(ErrorCode::ParseError, "kv line " + std::to_string(lineno) +
                                      " has an empty key");
    }
    doc.emplace_back(key, value);
  }
  return doc;
}

KvDocument read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_kv(buf.str());
}

void write_kv(const std::string& path, const KvDocument& doc) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  for (const auto& [key, value] : doc) {
    out << key << " = " << value << "\n";
  }
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

KvDocument params_to_kv(const ParamSet& params, const ModelSpec& spec,
                        const PanelDataset& data) {
  KvDocument doc;
  doc.emplace_back("model.tau", format_double(spec.tau));
  doc.emplace_back("model.m", std::to_string(spec.m));
  doc.emplace_back("model.G", std::to_string(spec.G));
  doc.emplace_back("model.prior_mode", prior_mode_name(spec.prior_mode));
  for (int j = 0; j < data.p(); ++j) {
    doc.emplace_back("beta." + data.x_names()[j], format_double(params.beta[j]));
  }
  for (int h = 0; h < spec.m; ++h) {
    for (int j = 0; j < data.d(); ++j) {
      doc.emplace_back("alpha." + std::to_string(h + 1) + "." + data.w_names()[j],
                       format_double(params.alpha[h][j]));
    }
  }
  for (int g = 0; g < spec.G; ++g) {
    for (int j = 0; j < data.r(); ++j) {
      doc.emplace_back("b." + std::to_string(g + 1) + "." + data.z_names()[j],
                       format_double(params.b[g][j]));
    }
  }
  for (int h = 0; h < spec.m; ++h) {
    doc.emplace_back("delta." + std::to_string(h + 1),
                     format_double(params.delta[h]));
  }
  for (int k = 0; k < spec.m; ++k) {
    for (int h = 0; h < spec.m; ++h) {
      doc.emplace_back("Q." + std::to_string(k + 1) + "." + std::to_string(h + 1),
                       format_double(params.Q(k, h)));
    }
  }
  doc.emplace_back("sigma", format_double(params.sigma));
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    for (int g = 0; g < spec.G; ++g) {
      doc.emplace_back("pi." + std::to_string(g + 1), format_double(params.pi[g]));
    }
  } else if (spec.G >= 2) {
    for (int g = 0; g < spec.G - 1; ++g) {
      doc.emplace_back("lambda0." + std::to_string(g + 1),
                       format_double(params.lambda0[g]));
    }
    doc.emplace_back("lambda1", format_double(params.lambda1));
  }
  return doc;
}

std::pair<ParamSet, ModelSpec> params_from_kv(const KvDocument& doc,
                                              const PanelDataset& data) {
  std::map<std::string, std::string> kv(doc.begin(), doc.end());
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      fail(ErrorCode::ParseError, "params document is missing key '" + key + "'");
    }
    return it->second;
  };

  ModelSpec spec;
  spec.tau = parse_double(need("model.tau"), "model.tau");
  spec.m = parse_int(need("model.m"), "model.m");
  spec.G = parse_int(need("model.G"), "model.G");
  spec.prior_mode = prior_mode_from_name(need("model.prior_mode"));
  spec.validate();

  ParamSet params;
  params.beta.resize(data.p());
  for (int j = 0; j < data.p(); ++j) {
    std::string key = "beta." + data.x_names()[j];
    params.beta[j] = parse_double(need(key), key);
  }
  params.alpha.assign(spec.m, Eigen::VectorXd(data.d()));
  for (int h = 0; h < spec.m; ++h) {
    for (int j = 0; j < data.d(); ++j) {
      std::string key =
          "alpha." + std::to_string(h + 1) + "." + data.w_names()[j];
      params.alpha[h][j] = parse_double(need(key), key);
    }
  }
  params.b.assign(spec.G, Eigen::VectorXd(data.r()));
  for (int g = 0; g < spec.G; ++g) {
    for (int j = 0; j < data.r(); ++j) {
      std::string key = "b." + std::to_string(g + 1) + "." + data.z_names()[j];
      params.b[g][j] = parse_double(need(key), key);
    }
  }
  params.delta.resize(spec.m);
  for (int h = 0; h < spec.m; ++h) {
    std::string key = "delta." + std::to_string(h + 1);
    params.delta[h] = parse_double(need(key), key);
  }
  params.Q.resize(spec.m, spec.m);
  for (int k = 0; k < spec.m; ++k) {
    for (int h = 0; h < spec.m; ++h) {
      std::string key =
          "Q." + std::to_string(k + 1) + "." + std::to_string(h + 1);
      params.Q(k, h) = parse_double(need(key), key);
    }
  }
  params.sigma = parse_double(need("sigma"), "sigma");
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    params.pi.resize(spec.G);
    for (int g = 0; g < spec.G; ++g) {
      std::string key = "pi." + std::to_string(g + 1);
      params.pi[g] = parse_double(need(key), key);
    }
  } else {
    params.lambda0.resize(spec.G - 1);
    for (int g = 0; g < spec.G - 1; ++g) {
      std::string key = "lambda0." + std::to_string(g + 1);
      params.lambda0[g] = parse_double(need(key), key);
    }
    params.lambda1 =
        spec.G >= 2 ? parse_double(need("lambda1"), "lambda1") : 0.0;
  }
  params.validate(spec, data.p(), data.r(), data.d());
  return {params, spec};
}

}  // namespace qhmm
