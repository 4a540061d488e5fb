#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "drsf/network.hpp"

namespace drsf::grid {

/// Reads a bus/line CSV pair.
///
/// Bus file: a required `#base,<S_base MVA>,<V_base kV>` line, an optional
/// `#v0,<p.u.^2>` line, then the header `id,p_load_kw,q_load_kvar,pv_p_kw,pv_s_kva`
/// and one row per bus. Blank PV fields mean no unit. Ids must be 0..n-1 with
/// 0 the substation. Line file: header `from,to,r_ohm,x_ohm`. Other lines
/// starting with `#` are comments. Quantities are converted to p.u.
///
/// Throws ParseError, UnitError (missing or bad base) or TopologyError.
Network load_network(const std::filesystem::path& bus_csv, const std::filesystem::path& line_csv,
                     const OperationalLimits& limits = {}, const NetworkOptions& options = {});

Network parse_network(std::istream& bus_csv, std::istream& line_csv, const OperationalLimits& limits = {},
                      const NetworkOptions& options = {}, const std::string& bus_name = "<bus>",
                      const std::string& line_name = "<line>");

}  // namespace drsf::grid
