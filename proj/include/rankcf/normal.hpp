#ifndef RANKCF_NORMAL_HPP
#define RANKCF_NORMAL_HPP

namespace rankcf {

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse of normal_cdf on (0, 1); accurate to a few ulps after refinement.
double normal_quantile(double p);

// E|X - t| for X ~ N(mean, sd^2).
double normal_mean_abs_deviation(double t, double mean, double sd);

double sigmoid(double x);

}  // namespace rankcf

#endif  // RANKCF_NORMAL_HPP
