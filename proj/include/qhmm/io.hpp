#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"

namespace qhmm {

// ---------------------------------------------------------------------------
// CSV (simple unquoted numeric/name cells)
// ---------------------------------------------------------------------------
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Long-format panel: header `unit,time,y,<covariate columns...>`; the x/z/w
// blocks are picked out by name (a column may serve several blocks).
PanelDataset read_panel_csv(const std::string& path,
                            const std::vector<std::string>& x_cols,
                            const std::vector<std::string>& z_cols,
                            const std::vector<std::string>& w_cols);

void write_panel_csv(const std::string& path, const PanelDataset& data);

// ---------------------------------------------------------------------------
// flat key-value documents (`key = value`, '#' comments)
// ---------------------------------------------------------------------------
using KvDocument = std::vector<std::pair<std::string, std::string>>;

KvDocument read_kv(const std::string& path);
KvDocument parse_kv(const std::string& text);
void write_kv(const std::string& path, const KvDocument& doc);

// numbers serialized with max_digits10 so serialize -> parse is exact
std::string format_double(double x);

// params.kv: model.* fields plus beta.<col>, alpha.<h>.<col>, b.<g>.<col>,
// delta.<h>, Q.<k>.<h>, sigma, pi.<g> / lambda0.<g>, lambda1.
KvDocument params_to_kv(const ParamSet& params, const ModelSpec& spec,
                        const PanelDataset& data);
std::pair<ParamSet, ModelSpec> params_from_kv(const KvDocument& doc,
                                              const PanelDataset& data);

}  // namespace qhmm
