#pragma once

#include "hydroscale/integrators.hpp"
#include "hydroscale/stochastics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hydroscale {

// Flat binary layout shared by increments, controls and paths (little-endian):
//   magic "HSB1", f64 T, u64 steps, u64 columns, u64 seed, u64 replica,
//   then rows * columns f64 values, row-major.
struct FlatArray {
    double T = 1.0;
    std::uint64_t steps = 0;
    std::uint64_t columns = 0;
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    std::vector<double> values;
};

void write_flat(const std::filesystem::path& file, const FlatArray& a);
FlatArray read_flat(const std::filesystem::path& file);

FlatArray to_flat(const WienerIncrements& inc);
FlatArray to_flat(const ControlPath& h);
/// steps + 1 rows (one per node).
FlatArray to_flat(const StatePath& path);

WienerIncrements increments_from_flat(const FlatArray& a);
ControlPath control_from_flat(const FlatArray& a);
StatePath path_from_flat(const FlatArray& a);

/// Shortest decimal form that round-trips ("%.17g").
std::string format_double(double x);

/// Rows of (columns) with a mandatory header; values written with format_double.
void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_csv(const std::filesystem::path& file, const WienerIncrements& inc);
void write_csv(const std::filesystem::path& file, const ControlPath& h);
/// Per node: t, |u|, ||u||, ||u||_H.
void write_norms_csv(const std::filesystem::path& file, const ModelSpec& model, const StatePath& path);

std::string provenance_json(const StatePath& path);
/// Writes <stem>.bin and <stem>.json (provenance sidecar).
void write_path(const std::filesystem::path& stem, const StatePath& path);

}  // namespace hydroscale
