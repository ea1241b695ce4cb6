#include "fricmot/coupling.hpp"

#include <algorithm>
#include <cmath>

namespace fricmot {

std::vector<double> CouplingMatrix::row_sums() const {
  std::vector<double> s(rows(), 0.0);
  for (std::size_t i = 0; i < rows(); ++i)
    for (std::size_t j = 0; j < cols(); ++j) s[i] += (*this)(i, j);
  return s;
}

std::vector<double> CouplingMatrix::col_sums() const {
  std::vector<double> s(cols(), 0.0);
  for (std::size_t i = 0; i < rows(); ++i)
    for (std::size_t j = 0; j < cols(); ++j) s[j] += (*this)(i, j);
  return s;
}

double CouplingMatrix::barycenter_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols(); ++j) s += (*this)(i, j) * (targets[j] - sources[i]);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

double CouplingMatrix::integrate(const std::function<double(double, double)>& g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < rows(); ++i)
    for (std::size_t j = 0; j < cols(); ++j) {
      const double p = (*this)(i, j);
      if (p != 0.0) s += p * g(sources[i], targets[j]);
    }
  return s;
}

void BiatomicKernel::push(double xi, double wi, double td, double tu, double th, bool b, int comp) {
  x.push_back(xi);
  weight.push_back(wi);
  t_down.push_back(td);
  t_up.push_back(tu);
  theta.push_back(th);
  band.push_back(b ? 1 : 0);
  component.push_back(comp);
}

bool BiatomicKernel::has_tag(const std::string& t) const {
  return std::find(tags.begin(), tags.end(), t) != tags.end();
}

}  // namespace fricmot
