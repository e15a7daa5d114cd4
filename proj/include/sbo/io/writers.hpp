#pragma once

#include "sbo/mesh/domain.hpp"
#include "sbo/optim/sliding.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sbo::io {

/// %.17g: enough digits to read the same double back.
std::string format_real(double v);

/// Column-major table; every column has the same length.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
    /// Throws a Config error when the column is missing.
    const std::vector<double>& column(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Numeric CSV with one header line.
CsvTable read_csv(const std::filesystem::path& path);

/// STRUCTURED_GRID with points (r, z, 0); one cell scalar.
void write_field_vtk(const std::filesystem::path& path, const mesh::QuadGrid& grid, std::span<const double> field,
                     const std::string& name);
/// UNSTRUCTURED_GRID of linear tets (cell type 10); one cell scalar.
void write_field_vtk(const std::filesystem::path& path, const mesh::TetMesh& mesh, std::span<const double> field,
                     const std::string& name);

/// Columns i_sb, accepted, f, evals, seconds.
void write_trace_csv(const std::filesystem::path& path, const optim::SlideTrace& trace);

/// One weight per line.
void write_weights(const std::filesystem::path& path, std::span<const double> w);
std::vector<double> read_weights(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Output directory built under a sibling temporary name and moved into place
/// by commit(). Destroying an uncommitted stage removes it.
class StagedDirectory {
public:
    explicit StagedDirectory(std::filesystem::path target);
    ~StagedDirectory();
    StagedDirectory(const StagedDirectory&) = delete;
    StagedDirectory& operator=(const StagedDirectory&) = delete;

    const std::filesystem::path& path() const noexcept { return stage_; }
    std::filesystem::path file(const std::string& name) const { return stage_ / name; }
    /// Replaces an earlier run directory (one holding summary.json); refuses
    /// to replace anything else.
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path stage_;
    bool committed_ = false;
};

} // namespace sbo::io
