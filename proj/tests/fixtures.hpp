#pragma once

// Summary counts for seventeen donor assays (C1..C17). Per-lineage counts are
// not part of the source data; the Y values below are synthetic but
// consistent: each lineage is seen once at a sequenced level and the first
// lineages absorb any shortfall so that sum(Y) >= m.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "iupm/assay.hpp"

namespace fixtures {

struct Subject {
  const char* id;
  std::vector<double> u;
  std::vector<std::int64_t> M, MP, m;
  std::size_t n;
};

inline const std::vector<Subject>& subjects() {
  static const std::vector<double> u3{2.5, 0.5, 0.1};
  static const std::vector<double> u4{2.5, 0.5, 0.1, 0.025};
  static const std::vector<Subject> all{
      {"C1", u3, {36, 6, 6}, {4, 0, 0}, {4, 0, 0}, 12},
      {"C2", u3, {36, 6, 6}, {5, 1, 0}, {5, 0, 0}, 7},
      {"C3", u3, {18, 6, 6}, {5, 0, 0}, {5, 0, 0}, 4},
      {"C4", u3, {18, 6, 6}, {5, 1, 0}, {3, 0, 0}, 3},
      {"C5", u4, {14, 6, 6, 6}, {4, 0, 1, 0}, {3, 0, 0, 0}, 3},
      {"C6", u3, {18, 6, 6}, {7, 0, 0}, {6, 0, 0}, 4},
      {"C7", u3, {36, 6, 6}, {15, 1, 0}, {15, 0, 0}, 39},
      {"C8", u3, {36, 6, 6}, {22, 2, 1}, {22, 0, 0}, 26},
      {"C9", u4, {12, 6, 6, 6}, {9, 0, 0, 0}, {6, 0, 0, 0}, 8},
      {"C10", u3, {18, 6, 6}, {12, 3, 1}, {6, 0, 0}, 19},
      {"C11", u4, {12, 6, 6, 6}, {9, 1, 1, 1}, {6, 0, 0, 0}, 9},
      {"C12", u3, {36, 6, 6}, {32, 3, 1}, {32, 0, 0}, 65},
      {"C13", u4, {18, 6, 6, 6}, {16, 4, 3, 0}, {0, 4, 0, 0}, 7},
      {"C14", u3, {18, 6, 6}, {18, 3, 1}, {0, 3, 0}, 3},
      {"C15", u3, {18, 6, 6}, {18, 5, 0}, {0, 5, 0}, 6},
      {"C16", u4, {12, 6, 6, 6}, {12, 4, 2, 0}, {0, 4, 0, 0}, 8},
      {"C17", u4, {18, 6, 6, 6}, {18, 4, 3, 1}, {0, 4, 0, 0}, 6},
  };
  return all;
}

inline const Subject& subject(const std::string& id) {
  for (const auto& s : subjects()) {
    if (id == s.id) return s;
  }
  throw std::out_of_range("unknown subject " + id);
}

inline iupm::MultiDilutionAssay with_udsa(const Subject& s) {
  iupm::MultiDilutionAssay a;
  a.n = s.n;
  std::vector<std::size_t> sequenced;
  for (std::size_t d = 0; d < s.u.size(); ++d) {
    iupm::DilutionLevel lv;
    lv.u = s.u[d];
    lv.M = s.M[d];
    lv.MN = s.M[d] - s.MP[d];
    lv.m = s.m[d];
    lv.Y.assign(s.n, 0);
    if (lv.m > 0) sequenced.push_back(d);
    a.levels.push_back(lv);
  }
  for (std::size_t i = 0; i < s.n && !sequenced.empty(); ++i) {
    a.levels[sequenced[i % sequenced.size()]].Y[i] = 1;
  }
  for (auto d : sequenced) {
    auto& lv = a.levels[d];
    std::int64_t total = 0;
    for (auto y : lv.Y) total += y;
    for (std::size_t i = 0; total < lv.m; i = (i + 1) % s.n) {
      if (lv.Y[i] < lv.m) {
        ++lv.Y[i];
        ++total;
      }
    }
  }
  for (std::size_t i = 0; i < s.n; ++i) a.dvl_ids.push_back("L" + std::to_string(i + 1));
  return a;
}

inline iupm::MultiDilutionAssay without_udsa(const Subject& s) {
  return iupm::without_udsa(with_udsa(s));
}

}  // namespace fixtures
