#pragma once

// Assay data model: one dilution level's sufficient statistics, the
// multi-dilution unit of estimation, and the per-well records used by the
// imperfect-assay model.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iupm {

struct DilutionLevel {
  double u = 1.0;          // millions of cells per well
  std::int64_t M = 0;      // replicate wells
  std::int64_t MN = 0;     // negative wells
  std::int64_t m = 0;      // sequenced positive wells
  std::vector<std::int64_t> Y;  // per-DVL sequenced-positive counts
  std::optional<double> q;      // design sequencing fraction

  std::int64_t MP() const { return M - MN; }

  // q when given, otherwise m / M_P (0 when M_P = 0).
  double q_or_derived() const;

  bool operator==(const DilutionLevel&) const = default;
};

struct MultiDilutionAssay {
  std::size_t n = 0;
  std::vector<DilutionLevel> levels;
  // Optional DVL labels, length n when present. Used for alignment and output.
  std::vector<std::string> dvl_ids;

  std::size_t D() const { return levels.size(); }

  bool operator==(const MultiDilutionAssay&) const = default;
};

struct WellRecord {
  int w_star = 0;
  int r = 0;
  std::vector<std::uint8_t> z_star;  // length n iff r == 1, empty otherwise

  bool operator==(const WellRecord&) const = default;
};

struct WellAssay {
  double u = 1.0;
  std::size_t n = 0;
  std::vector<WellRecord> wells;

  bool operator==(const WellAssay&) const = default;
};

struct ErrorRates {
  double sens_qvoa = 1.0;
  double spec_qvoa = 1.0;
  double sens_udsa = 1.0;
  double spec_udsa = 1.0;

  bool perfect() const {
    return sens_qvoa == 1.0 && spec_qvoa == 1.0 && sens_udsa == 1.0 &&
           spec_udsa == 1.0;
  }
};

struct Violation {
  std::string code;  // short machine tag, e.g. "m>MP"
  std::string message;
  int level = -1;    // -1 when not level specific
  int dvl = -1;      // -1 when not DVL specific
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const;
  std::string to_string() const;
};

struct ValidationOptions {
  // Every DVL must be seen at least once (undetected lineages are excluded).
  bool require_detected = true;
  // Every sequenced positive well carries at least one DVL (sum Y >= m).
  // Data read through imperfect assays can break this.
  bool require_cover = true;
};

ValidationReport validate(const MultiDilutionAssay& assay,
                          const ValidationOptions& opts = {});
ValidationReport validate(const WellAssay& wells);
ValidationReport validate(const ErrorRates& rates);

// Throws InvalidAssay carrying the report text when validation fails.
void require_valid(const MultiDilutionAssay& assay,
                   const ValidationOptions& opts = {});

// Sufficient statistics from perfect-assay well data. Z holds one row per
// well; rows for unsequenced wells (R_j = 0) may be empty. n defaults to the
// common length of the non-empty rows.
DilutionLevel summarize_wells(double u, const std::vector<int>& W,
                              const std::vector<std::vector<int>>& Z,
                              const std::vector<int>& R,
                              std::optional<std::size_t> n = std::nullopt);

// The same counts read off imperfect-assay records as if they were exact.
DilutionLevel summarize_wells(const WellAssay& wells);
MultiDilutionAssay summarize_wells(const std::vector<WellAssay>& levels);

// One-parameter view of the data: UDSA ignored (n = 1, Y = 0, m = 0, q = 0).
MultiDilutionAssay without_udsa(const MultiDilutionAssay& assay);

// Removes DVLs with zero counts at every level.
MultiDilutionAssay drop_undetected(const MultiDilutionAssay& assay);

// Appends a DVL with zero counts at every level.
MultiDilutionAssay with_zero_dvl(const MultiDilutionAssay& assay,
                                 const std::string& id = "");

}  // namespace iupm
