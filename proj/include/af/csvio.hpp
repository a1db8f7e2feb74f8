#pragma once

#include <filesystem>

#include "af/density.hpp"
#include "af/mat.hpp"

namespace af {

// Sample files: header "dim_1,...,dim_d", one sample per row, doubles printed
// with 17 significant digits so parse(print(X)) == X bit-exactly.
void write_samples_csv(const std::filesystem::path& path, const Mat& samples);
Mat read_samples_csv(const std::filesystem::path& path);

// Logistic datasets: one observation per row, features then the +/-1 label.
BayesianLogisticPosteriorParams read_logit_dataset_csv(const std::filesystem::path& path);
void write_logit_dataset_csv(const std::filesystem::path& path,
                             const BayesianLogisticPosteriorParams& data);

}  // namespace af
