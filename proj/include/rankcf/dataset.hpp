#ifndef RANKCF_DATASET_HPP
#define RANKCF_DATASET_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rankcf {

enum class TreatmentMode { binary, continuous };
enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view label);  // "train" | "val" | "test"
std::string_view to_string(TreatmentMode mode);
TreatmentMode parse_treatment_mode(std::string_view text);

// N observed rows of (treatment, covariates, outcome) plus a split label.
// Immutable once constructed; the constructor enforces every invariant and
// throws ValidationError on the first violation.
class ObservationalDataset {
 public:
  // `covariates` is row-major with `dim` columns.
  ObservationalDataset(TreatmentMode mode, std::vector<double> treatments,
                       std::vector<double> covariates, std::size_t dim,
                       std::vector<double> outcomes, std::vector<Split> splits);

  TreatmentMode mode() const { return mode_; }
  std::size_t size() const { return outcomes_.size(); }
  std::size_t dim() const { return dim_; }

  double treatment(std::size_t k) const { return treatments_[k]; }
  double outcome(std::size_t k) const { return outcomes_[k]; }
  Split split(std::size_t k) const { return splits_[k]; }
  std::span<const double> covariates(std::size_t k) const {
    return {covariates_.data() + k * dim_, dim_};
  }

  std::span<const double> treatments() const { return treatments_; }
  std::span<const double> outcomes() const { return outcomes_; }
  std::span<const double> covariate_matrix() const { return covariates_; }
  std::span<const Split> splits() const { return splits_; }

  std::vector<std::size_t> indices(Split split) const;
  // Rows in the given order. Split labels are carried over.
  ObservationalDataset select(std::span<const std::size_t> rows) const;
  ObservationalDataset subset(Split split) const;

  // Copy with covariates transformed column-wise as (z - shift) / scale.
  ObservationalDataset standardized(std::span<const double> shift,
                                    std::span<const double> scale) const;

 private:
  TreatmentMode mode_;
  std::size_t dim_;
  std::vector<double> treatments_;
  std::vector<double> covariates_;
  std::vector<double> outcomes_;
  std::vector<Split> splits_;
};

// One unit's factual triple plus the treatment of the counterfactual query.
struct Evidence {
  double x = 0.0;
  std::vector<double> z;
  double y = 0.0;
  double x_prime = 1.0;
};

// Throws ValidationError when z has the wrong length, a value is non-finite, or
// (binary mode) x / x_prime are not distinct codes in {0, 1}.
void validate_evidence(const Evidence& evidence, std::size_t dim, TreatmentMode mode);

// Simulation-only ground truth aligned row-for-row with a dataset.
struct PotentialOutcomeTable {
  std::vector<double> y0;
  std::vector<double> y1;

  std::size_t size() const { return y0.size(); }
  PotentialOutcomeTable select(std::span<const std::size_t> rows) const;
};

// True iff every observed outcome equals the potential outcome of its arm
// within 1e-12. Throws AlignmentError on a length mismatch.
bool consistency_check(const ObservationalDataset& dataset, const PotentialOutcomeTable& table);

// Column names used to read a CSV. Empty `covariates` means "every column not
// named elsewhere in the schema", in file order.
struct CsvSchema {
  std::string treatment = "x";
  std::vector<std::string> covariates;
  std::string outcome = "y";
  std::optional<std::string> split = "split";
  std::optional<std::string> y0;
  std::optional<std::string> y1;
  std::optional<std::string> randomized;
  TreatmentMode mode = TreatmentMode::binary;
};

struct LoadedData {
  ObservationalDataset dataset;
  std::vector<std::string> covariate_names;
  std::optional<PotentialOutcomeTable> truth;
  // Membership in the randomized subset E, when the file carries it.
  std::optional<std::vector<bool>> randomized;
};

// Reads a comma-separated file with a header row. A split column named in the
// schema but absent from the header is treated as "every row is train"; empty
// split cells also default to train.
LoadedData load_csv_full(const std::string& path, const CsvSchema& schema);
ObservationalDataset load_csv(const std::string& path, const CsvSchema& schema);

// Writes x, covariates, y, split (and y0, y1 when given) with shortest
// round-trip number formatting.
void write_csv(const std::string& path, const ObservationalDataset& dataset,
               std::span<const std::string> covariate_names = {},
               const PotentialOutcomeTable* truth = nullptr);

std::vector<std::string> default_covariate_names(std::size_t dim);

// Minimal CSV table: header plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable read_csv_table(const std::string& path);
// Row indices in error messages are 1-based data rows (header excluded).
double parse_cell(const CsvTable& table, std::size_t row, std::size_t col);

// Reads a queries file with columns x, <covariate names>, y, x_prime.
std::vector<Evidence> load_queries_csv(const std::string& path,
                                       std::span<const std::string> covariate_names);

}  // namespace rankcf

#endif  // RANKCF_DATASET_HPP
