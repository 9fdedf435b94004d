#pragma once

#include <span>
#include <vector>

namespace survtransport::stats {

// Ranks starting at 1, ties receive their average rank.
std::vector<double> average_ranks(std::span<const double> values);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator).
double sd(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// Linear-interpolation quantile (R type 7). `values` need not be sorted.
double quantile(std::vector<double> values, double prob);

double normal_cdf(double z);
double normal_quantile(double p);
// Upper tail P(X > x) for a chi-square with `df` degrees of freedom.
double chisq_upper_tail(double x, double df);

}  // namespace survtransport::stats
