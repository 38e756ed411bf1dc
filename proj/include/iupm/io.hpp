#pragma once

// Readers and writers for the two external formats:
//   summary-json  {"n": 2, "dvls": ["a", "b"]?,
//                  "levels": [{"u": 1, "M": 12, "MN": 6, "m": 3, "q": 0.5?,
//                              "Y": [2, 1]}]}
//   wells-csv     well,u,w_star,r,z_<dvl-id>...   (one row per well; z cells
//                 are blank exactly when r = 0)

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "iupm/assay.hpp"

namespace iupm {

enum class InputFormat { SummaryJson, WellsCsv };

std::optional<InputFormat> parse_format_name(std::string_view name);
std::string_view format_name(InputFormat f);

// Picks a format from a file name, falling back to sniffing the content.
InputFormat guess_format(std::string_view path, std::string_view content);

struct WellData {
  std::vector<std::string> dvl_ids;
  std::vector<WellAssay> levels;  // one per distinct u, in order of appearance
};

MultiDilutionAssay parse_summary_json(std::string_view text,
                                      const ValidationOptions& opts = {});
std::string to_summary_json(const MultiDilutionAssay& assay);

WellData parse_wells_csv(std::string_view text);
std::string to_wells_csv(const WellData& data);

std::variant<MultiDilutionAssay, WellData> parse_assay(std::string_view bytes,
                                                       InputFormat format);

std::string read_file(const std::string& path);  // "-" reads stdin

}  // namespace iupm
