#ifndef SEQFLOW_SPECTRUM_HPP
#define SEQFLOW_SPECTRUM_HPP

// Empirical Fourier spectrum of a tabular regression target in kernel
// eigenvalue order.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqflow/kernel_bridge.hpp"

namespace seqflow {

enum class IngestErrorCode { unreadable, non_utf8, missing_target_column, zero_usable_rows };

class IngestError : public std::runtime_error {
public:
    IngestError(IngestErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    IngestErrorCode code() const noexcept { return code_; }

private:
    IngestErrorCode code_;
};

const char* to_string(IngestErrorCode code);

struct TabularDataset {
    std::vector<std::string> feature_names;
    std::string target_name;
    std::vector<std::vector<double>> features;  // row-major, n x d
    std::vector<double> target;
    std::size_t dropped_count = 0;

    std::size_t n() const { return target.size(); }
    std::size_t d() const { return feature_names.size(); }
};

/// Header row plus numeric rows; the delimiter (comma, semicolon or tab) is
/// taken from the header. Rows with a missing, non-numeric or non-finite cell
/// are dropped and counted. Column order is preserved.
TabularDataset ingest_csv(const std::string& path, const std::string& target_column);
TabularDataset parse_csv_text(const std::string& text, const std::string& target_column);

struct FeatureMap {
    std::string name;
    double min = 0.0;
    double max = 0.0;
};

struct NormalizedDataset {
    TabularDataset data;
    std::vector<FeatureMap> maps;                // kept features, in order
    std::vector<std::string> dropped_features;   // constant columns
    std::vector<std::string> warnings;
    double guard = 0.0;                          // 2 / (10 n)
};

/// Affine map of every feature onto [-1, 1 - guard]; constant features are dropped with a warning.
NormalizedDataset normalize_to_torus(const TabularDataset& data);

struct SpectrumEntry {
    std::size_t rank = 0;  // 1-based, eigenvalue order
    std::string multi_index;
    double lambda = 0.0;
    double coefficient = 0.0;
    double cumulative_energy_fraction = 0.0;
};

struct CoefficientSpectrum {
    std::vector<SpectrumEntry> entries;
    double total_energy = 0.0;   // sum of squared coefficients
    double target_energy = 0.0;  // (1/n) sum y^2
    double noise_floor = 0.0;    // sqrt(target_energy / n), the O(n^{-1/2}) level of a coefficient
    std::size_t n = 0;

    /// Fraction of total_energy held by the k largest |coefficient|.
    double top_k_energy_fraction(std::size_t k) const;
};

/// coefficient_m = (1/n) sum_i y_i e_m(x_i) for each basis function, in basis order.
CoefficientSpectrum empirical_coefficients(const TabularDataset& data, const FourierDesign& basis,
                                           unsigned threads = 1);

/// rank,multi_index,lambda,coefficient,cumulative_energy_fraction
void write_spectrum_csv(std::ostream& out, const CoefficientSpectrum& spec);

}  // namespace seqflow

#endif  // SEQFLOW_SPECTRUM_HPP
