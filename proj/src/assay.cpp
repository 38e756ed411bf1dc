#include "iupm/assay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "iupm/errors.hpp"

namespace iupm {

double DilutionLevel::q_or_derived() const {
  if (q) return *q;
  const std::int64_t mp = MP();
  return mp > 0 ? static_cast<double>(m) / static_cast<double>(mp) : 0.0;
}

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < violations.size(); ++k) {
    const auto& v = violations[k];
    if (k) os << "; ";
    os << v.code;
    if (v.level >= 0) os << " [level " << v.level;
    if (v.dvl >= 0) os << (v.level >= 0 ? ", " : " [") << "dvl " << v.dvl;
    if (v.level >= 0 || v.dvl >= 0) os << "]";
    if (!v.message.empty()) os << ": " << v.message;
  }
  return os.str();
}

namespace {

void add(ValidationReport& r, std::string code, std::string msg, int level = -1,
         int dvl = -1) {
  r.violations.push_back({std::move(code), std::move(msg), level, dvl});
}

}  // namespace

ValidationReport validate(const MultiDilutionAssay& assay,
                          const ValidationOptions& opts) {
  ValidationReport rep;
  if (assay.levels.empty()) {
    add(rep, "empty", "no dilution levels");
    return rep;
  }
  if (!assay.dvl_ids.empty()) {
    if (assay.dvl_ids.size() != assay.n) {
      add(rep, "ids", "dvl_ids length differs from n");
    } else {
      std::set<std::string> seen(assay.dvl_ids.begin(), assay.dvl_ids.end());
      if (seen.size() != assay.n) add(rep, "ids", "duplicate DVL identifiers");
    }
  }
  std::vector<std::int64_t> totals(assay.n, 0);
  for (std::size_t d = 0; d < assay.levels.size(); ++d) {
    const auto& lv = assay.levels[d];
    const int di = static_cast<int>(d);
    if (!(lv.u > 0.0) || !std::isfinite(lv.u)) {
      add(rep, "u", "cells per well must be positive", di);
    }
    if (lv.M < 1) add(rep, "M", "need at least one well", di);
    if (lv.MN < 0) add(rep, "MN<0", "negative well count below zero", di);
    if (lv.MN > lv.M) add(rep, "MN>M", "more negative wells than wells", di);
    if (lv.m < 0) add(rep, "m<0", "sequenced count below zero", di);
    if (lv.m > lv.MP()) add(rep, "m>MP", "m > M_P", di);
    if (lv.q && !(*lv.q >= 0.0 && *lv.q <= 1.0)) {
      add(rep, "q", "q outside [0, 1]", di);
    }
    if (lv.Y.size() != assay.n) {
      add(rep, "Y-length", "Y length differs from n", di);
      continue;
    }
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < assay.n; ++i) {
      const auto y = lv.Y[i];
      if (y < 0) add(rep, "Y<0", "negative count", di, static_cast<int>(i));
      if (y > lv.m) add(rep, "Y>m", "Y_i > m", di, static_cast<int>(i));
      sum += y;
      totals[i] += y;
    }
    if (opts.require_cover && lv.m > 0 && sum < lv.m) {
      add(rep, "sumY<m", "Σ Y_i < m", di);
    }
  }
  for (std::size_t d = 0; d < assay.levels.size(); ++d) {
    for (std::size_t e = d + 1; e < assay.levels.size(); ++e) {
      if (assay.levels[d].u == assay.levels[e].u) {
        add(rep, "u-dup", "dilution levels share u", static_cast<int>(e));
      }
    }
  }
  bool sequenced = false;
  for (const auto& lv : assay.levels) sequenced = sequenced || lv.m > 0;
  // Without sequencing no DVL can be seen, so only the single-rate view
  // makes sense and the detection requirement does not apply.
  if (opts.require_detected && sequenced) {
    for (std::size_t i = 0; i < assay.n; ++i) {
      if (totals[i] < 1) {
        add(rep, "undetected", "DVL has zero counts at every level", -1,
            static_cast<int>(i));
      }
    }
  }
  return rep;
}

ValidationReport validate(const WellAssay& wa) {
  ValidationReport rep;
  if (!(wa.u > 0.0) || !std::isfinite(wa.u)) {
    add(rep, "u", "cells per well must be positive");
  }
  if (wa.wells.empty()) add(rep, "M", "no wells");
  for (std::size_t j = 0; j < wa.wells.size(); ++j) {
    const auto& w = wa.wells[j];
    const int jj = static_cast<int>(j);
    if (w.w_star != 0 && w.w_star != 1) add(rep, "w_star", "not 0/1", jj);
    if (w.r != 0 && w.r != 1) add(rep, "r", "not 0/1", jj);
    if (w.r == 1 && w.w_star != 1) {
      add(rep, "r-on-negative", "sequenced well is QVOA negative", jj);
    }
    if (w.r == 1 && w.z_star.size() != wa.n) {
      add(rep, "z-missing", "sequenced well lacks a full z row", jj);
    }
    if (w.r == 0 && !w.z_star.empty()) {
      add(rep, "z-unsequenced", "unsequenced well carries z values", jj);
    }
    for (auto z : w.z_star) {
      if (z > 1) {
        add(rep, "z", "z value not 0/1", jj);
        break;
      }
    }
  }
  return rep;
}

ValidationReport validate(const ErrorRates& r) {
  ValidationReport rep;
  auto check = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) add(rep, name, "probability outside [0, 1]");
  };
  check(r.sens_qvoa, "sens_qvoa");
  check(r.spec_qvoa, "spec_qvoa");
  check(r.sens_udsa, "sens_udsa");
  check(r.spec_udsa, "spec_udsa");
  if (rep.ok()) {
    if (!(r.sens_qvoa + r.spec_qvoa > 1.0)) {
      add(rep, "qvoa-rates", "QVOA sensitivity + specificity must exceed 1");
    }
    if (!(r.sens_udsa + r.spec_udsa > 1.0)) {
      add(rep, "udsa-rates", "UDSA sensitivity + specificity must exceed 1");
    }
  }
  return rep;
}

void require_valid(const MultiDilutionAssay& assay,
                   const ValidationOptions& opts) {
  const auto rep = validate(assay, opts);
  if (!rep.ok()) throw InvalidAssay("invalid assay: " + rep.to_string());
}

DilutionLevel summarize_wells(double u, const std::vector<int>& W,
                              const std::vector<std::vector<int>>& Z,
                              const std::vector<int>& R,
                              std::optional<std::size_t> n) {
  const std::size_t M = W.size();
  if (R.size() != M || Z.size() != M) {
    throw InvalidAssay("summarize_wells: W, Z and R must have one entry per well");
  }
  if (!n) {
    for (const auto& row : Z) {
      if (row.empty()) continue;
      if (n && *n != row.size()) {
        throw InvalidAssay("summarize_wells: Z rows differ in length");
      }
      n = row.size();
    }
  }
  const std::size_t nn = n.value_or(0);
  DilutionLevel lv;
  lv.u = u;
  lv.M = static_cast<std::int64_t>(M);
  lv.Y.assign(nn, 0);
  for (std::size_t j = 0; j < M; ++j) {
    if (W[j] == 0) ++lv.MN;
    if (R[j] != 1) continue;
    if (Z[j].size() != nn) {
      throw InvalidAssay("summarize_wells: sequenced well " + std::to_string(j) +
                         " has no Z row of length n");
    }
    if (W[j] == 1) ++lv.m;
    for (std::size_t i = 0; i < nn; ++i) lv.Y[i] += Z[j][i] != 0 ? 1 : 0;
  }
  return lv;
}

DilutionLevel summarize_wells(const WellAssay& wa) {
  std::vector<int> W, R;
  std::vector<std::vector<int>> Z;
  W.reserve(wa.wells.size());
  for (const auto& w : wa.wells) {
    W.push_back(w.w_star);
    R.push_back(w.r);
    Z.emplace_back(w.z_star.begin(), w.z_star.end());
  }
  return summarize_wells(wa.u, W, Z, R, wa.n);
}

MultiDilutionAssay summarize_wells(const std::vector<WellAssay>& levels) {
  MultiDilutionAssay out;
  out.n = levels.empty() ? 0 : levels.front().n;
  for (const auto& wa : levels) {
    if (wa.n != out.n) throw InvalidAssay("well assays disagree on n");
    out.levels.push_back(summarize_wells(wa));
  }
  return out;
}

MultiDilutionAssay without_udsa(const MultiDilutionAssay& assay) {
  MultiDilutionAssay out;
  out.n = 1;
  for (auto lv : assay.levels) {
    lv.m = 0;
    lv.Y.assign(1, 0);
    lv.q = 0.0;
    out.levels.push_back(std::move(lv));
  }
  return out;
}

MultiDilutionAssay drop_undetected(const MultiDilutionAssay& assay) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < assay.n; ++i) {
    std::int64_t t = 0;
    for (const auto& lv : assay.levels) t += i < lv.Y.size() ? lv.Y[i] : 0;
    if (t > 0) keep.push_back(i);
  }
  MultiDilutionAssay out;
  out.n = keep.size();
  for (const auto& lv : assay.levels) {
    DilutionLevel nl = lv;
    nl.Y.clear();
    for (auto i : keep) nl.Y.push_back(lv.Y[i]);
    out.levels.push_back(std::move(nl));
  }
  if (assay.dvl_ids.size() == assay.n) {
    for (auto i : keep) out.dvl_ids.push_back(assay.dvl_ids[i]);
  }
  return out;
}

MultiDilutionAssay with_zero_dvl(const MultiDilutionAssay& assay,
                                 const std::string& id) {
  MultiDilutionAssay out = assay;
  out.n += 1;
  for (auto& lv : out.levels) lv.Y.push_back(0);
  if (!out.dvl_ids.empty()) {
    out.dvl_ids.push_back(id.empty() ? "dvl" + std::to_string(out.n) : id);
  }
  return out;
}

}  // namespace iupm
