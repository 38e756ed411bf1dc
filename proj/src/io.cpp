#include "iupm/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iupm/errors.hpp"

namespace iupm {

using nlohmann::json;

std::optional<InputFormat> parse_format_name(std::string_view name) {
  if (name == "summary-json" || name == "json") return InputFormat::SummaryJson;
  if (name == "wells-csv" || name == "csv") return InputFormat::WellsCsv;
  return std::nullopt;
}

std::string_view format_name(InputFormat f) {
  return f == InputFormat::SummaryJson ? "summary-json" : "wells-csv";
}

InputFormat guess_format(std::string_view path, std::string_view content) {
  auto ends_with = [&](std::string_view s) {
    return path.size() >= s.size() && path.substr(path.size() - s.size()) == s;
  };
  if (ends_with(".json")) return InputFormat::SummaryJson;
  if (ends_with(".csv")) return InputFormat::WellsCsv;
  const auto pos = content.find_first_not_of(" \t\r\n");
  if (pos != std::string_view::npos && content[pos] == '{') {
    return InputFormat::SummaryJson;
  }
  return InputFormat::WellsCsv;
}

namespace {

std::int64_t get_int(const json& obj, const char* key, std::size_t level) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    throw ParseError("level " + std::to_string(level) + ": \"" + key +
                     "\" must be an integer");
  }
  return it->get<std::int64_t>();
}

std::string shortest(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

MultiDilutionAssay parse_summary_json(std::string_view text,
                                      const ValidationOptions& opts) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("summary-json: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("summary-json: top level must be an object");
  const auto n_it = doc.find("n");
  if (n_it == doc.end() || !n_it->is_number_integer() || n_it->get<long long>() < 0) {
    throw ParseError("summary-json: \"n\" must be a non-negative integer");
  }
  MultiDilutionAssay assay;
  assay.n = n_it->get<std::size_t>();
  if (const auto ids = doc.find("dvls"); ids != doc.end()) {
    if (!ids->is_array()) throw ParseError("summary-json: \"dvls\" must be an array");
    for (const auto& id : *ids) {
      if (!id.is_string()) throw ParseError("summary-json: DVL ids must be strings");
      assay.dvl_ids.push_back(id.get<std::string>());
    }
  }
  const auto lv_it = doc.find("levels");
  if (lv_it == doc.end() || !lv_it->is_array()) {
    throw ParseError("summary-json: \"levels\" must be an array");
  }
  std::size_t d = 0;
  for (const auto& obj : *lv_it) {
    if (!obj.is_object()) throw ParseError("summary-json: level must be an object");
    DilutionLevel lv;
    const auto u = obj.find("u");
    if (u == obj.end() || !u->is_number()) {
      throw ParseError("level " + std::to_string(d) + ": \"u\" must be a number");
    }
    lv.u = u->get<double>();
    lv.M = get_int(obj, "M", d);
    lv.MN = get_int(obj, "MN", d);
    lv.m = get_int(obj, "m", d);
    if (const auto q = obj.find("q"); q != obj.end() && !q->is_null()) {
      if (!q->is_number()) throw ParseError("level " + std::to_string(d) + ": bad q");
      lv.q = q->get<double>();
    }
    const auto y = obj.find("Y");
    if (y == obj.end() || !y->is_array()) {
      throw ParseError("level " + std::to_string(d) + ": \"Y\" must be an array");
    }
    for (const auto& v : *y) {
      if (!v.is_number_integer()) {
        throw ParseError("level " + std::to_string(d) + ": Y entries must be integers");
      }
      lv.Y.push_back(v.get<std::int64_t>());
    }
    assay.levels.push_back(std::move(lv));
    ++d;
  }
  require_valid(assay, opts);
  return assay;
}

std::string to_summary_json(const MultiDilutionAssay& assay) {
  json doc;
  doc["n"] = assay.n;
  if (!assay.dvl_ids.empty()) doc["dvls"] = assay.dvl_ids;
  doc["levels"] = json::array();
  for (const auto& lv : assay.levels) {
    json o;
    o["u"] = lv.u;
    o["M"] = lv.M;
    o["MN"] = lv.MN;
    o["m"] = lv.m;
    if (lv.q) o["q"] = *lv.q;
    o["Y"] = lv.Y;
    doc["levels"].push_back(std::move(o));
  }
  return doc.dump(2) + "\n";
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos
                                         ? std::string_view::npos
                                         : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_bit(std::string_view cell, std::size_t row, const char* what) {
  cell = trim(cell);
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw ParseError("wells-csv row " + std::to_string(row) + ": " + what +
                   " must be 0 or 1");
}

double parse_double(std::string_view cell, std::size_t row) {
  cell = trim(cell);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("wells-csv row " + std::to_string(row) + ": bad u value");
  }
  return v;
}

}  // namespace

WellData parse_wells_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(start, nl - start));
    if (!line.empty()) lines.push_back(line);
    start = nl + 1;
  }
  if (lines.empty()) throw ParseError("wells-csv: empty input");
  const auto header = split_csv(lines.front());
  if (header.size() < 4 || trim(header[0]) != "well" || trim(header[1]) != "u" ||
      trim(header[2]) != "w_star" || trim(header[3]) != "r") {
    throw ParseError("wells-csv: header must start with well,u,w_star,r");
  }
  WellData data;
  std::set<std::string> seen;
  for (std::size_t c = 4; c < header.size(); ++c) {
    const auto h = trim(header[c]);
    if (h.size() < 3 || h.substr(0, 2) != "z_") {
      throw ParseError("wells-csv: DVL column \"" + std::string(h) +
                       "\" must be named z_<id>");
    }
    std::string id(h.substr(2));
    if (!seen.insert(id).second) {
      throw ParseError("wells-csv: duplicate DVL column z_" + id);
    }
    data.dvl_ids.push_back(std::move(id));
  }
  const std::size_t n = data.dvl_ids.size();
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto cells = split_csv(lines[row]);
    if (cells.size() != header.size()) {
      throw ParseError("wells-csv row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " cells");
    }
    const double u = parse_double(cells[1], row);
    WellRecord rec;
    rec.w_star = parse_bit(cells[2], row, "w_star");
    rec.r = parse_bit(cells[3], row, "r");
    std::size_t blanks = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (trim(cells[4 + i]).empty()) ++blanks;
    }
    if (rec.r == 1) {
      if (blanks) {
        throw ParseError("wells-csv row " + std::to_string(row) +
                         ": sequenced well has blank z cells");
      }
      for (std::size_t i = 0; i < n; ++i) {
        rec.z_star.push_back(static_cast<std::uint8_t>(parse_bit(cells[4 + i], row, "z")));
      }
    } else if (blanks != n) {
      throw ParseError("wells-csv row " + std::to_string(row) +
                       ": unsequenced well must leave z cells blank");
    }
    auto lv = std::find_if(data.levels.begin(), data.levels.end(),
                           [&](const WellAssay& w) { return w.u == u; });
    if (lv == data.levels.end()) {
      data.levels.push_back(WellAssay{u, n, {}});
      lv = std::prev(data.levels.end());
    }
    lv->wells.push_back(std::move(rec));
  }
  if (data.levels.empty()) throw ParseError("wells-csv: no wells");
  for (std::size_t d = 0; d < data.levels.size(); ++d) {
    const auto rep = validate(data.levels[d]);
    if (!rep.ok()) {
      throw InvalidAssay("wells-csv level " + std::to_string(d) + ": " +
                         rep.to_string());
    }
  }
  return data;
}

std::string to_wells_csv(const WellData& data) {
  std::ostringstream os;
  os << "well,u,w_star,r";
  for (const auto& id : data.dvl_ids) os << ",z_" << id;
  os << '\n';
  std::size_t k = 0;
  for (const auto& lv : data.levels) {
    for (const auto& w : lv.wells) {
      os << ++k << ',' << shortest(lv.u) << ',' << w.w_star << ',' << w.r;
      for (std::size_t i = 0; i < data.dvl_ids.size(); ++i) {
        os << ',';
        if (w.r == 1) os << static_cast<int>(w.z_star[i]);
      }
      os << '\n';
    }
  }
  return os.str();
}

std::variant<MultiDilutionAssay, WellData> parse_assay(std::string_view bytes,
                                                       InputFormat format) {
  if (format == InputFormat::SummaryJson) return parse_summary_json(bytes);
  return parse_wells_csv(bytes);
}

std::string read_file(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin),
                       std::istreambuf_iterator<char>());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace iupm
