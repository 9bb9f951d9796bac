#pragma once

#include <span>
#include <string>
#include <vector>

namespace cogspeech {

// Descriptive statistics over a sample. sd uses the N-1 denominator and is
// 0 for a single value.
struct Summary {
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double sum = 0.0;
};

// Throws PreconditionError on an empty sample.
Summary summarize(std::span<const double> values);

double mean(std::span<const double> values);
double median(std::span<const double> values);
double sample_sd(std::span<const double> values);

// An ordered list of named scalar features.
struct NamedVector {
  std::vector<std::string> names;
  std::vector<double> values;

  void push(std::string name, double value) {
    names.push_back(std::move(name));
    values.push_back(value);
  }
  void append(const NamedVector& other) {
    names.insert(names.end(), other.names.begin(), other.names.end());
    values.insert(values.end(), other.values.begin(), other.values.end());
  }
  std::size_t size() const noexcept { return values.size(); }
  // Throws std::out_of_range when absent.
  double at(std::string_view name) const;
};

}  // namespace cogspeech
