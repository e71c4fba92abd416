#pragma once

#include <vector>

namespace av {

double mean_of(const std::vector<double>& v);
// Standard error of the mean; 0 for fewer than 2 values.
double stderr_of_mean(const std::vector<double>& v);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace av
