#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ubk {

//! Covariate points X_1..X_n in R^d, stored row-major.
class Sample
{
public:
  Sample(std::size_t dim, std::vector<double> flat)
    : dim_(dim)
    , data_(std::move(flat))
  {
    if (dim_ == 0)
      throw std::invalid_argument("Sample: dimension must be positive");
    if (data_.empty() || data_.size() % dim_ != 0)
      throw std::invalid_argument("Sample: need n >= 1 points of dimension d");
  }

  //! One-dimensional sample from plain values.
  explicit Sample(std::vector<double> values)
    : Sample(1, std::move(values))
  {}

  std::size_t size() const { return data_.size() / dim_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> point(std::size_t i) const
  {
    return std::span<const double>(data_).subspan(i * dim_, dim_);
  }

  std::span<const double> flat() const { return data_; }

private:
  std::size_t dim_;
  std::vector<double> data_;
};

//! Covariates paired with scalar responses Y_1..Y_n.
class PairedSample
{
public:
  PairedSample(Sample base, std::vector<double> responses)
    : base_(std::move(base))
    , y_(std::move(responses))
  {
    if (y_.size() != base_.size())
      throw std::invalid_argument("PairedSample: response count differs from point count");
  }

  const Sample& base() const { return base_; }
  std::span<const double> responses() const { return y_; }
  double response(std::size_t i) const { return y_[i]; }
  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return base_.dim(); }

private:
  Sample base_;
  std::vector<double> y_;
};

} // namespace ubk
