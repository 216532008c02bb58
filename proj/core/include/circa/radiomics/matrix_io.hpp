#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace circa::radiomics {

/// Case x feature table with named rows and columns.
struct FeatureMatrix {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/// CSV with header "id,<columns...>", values printed round-trip exact.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

/// Column store: magic "CIRCACS1", uint32 LE schema length, canonical JSON
/// schema {columns, ids, rows, dtype, layout, sha256}, then float64 LE values
/// column after column.
void write_feature_columns(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_columns(const std::filesystem::path& path);

/// Keeps only the given columns, in the given order.
FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::size_t>& columns);

}  // namespace circa::radiomics
