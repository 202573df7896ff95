#ifndef DLNLAB_TEST_UTIL_HPP
#define DLNLAB_TEST_UTIL_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dlnlab/rng.hpp"
#include "dlnlab/tensor.hpp"
#include "dlnlab/text.hpp"

namespace dlnlab::testutil {

// Central-difference gradient check: the independent oracle against which
// every backward rule is verified. `build` must construct the scalar loss on
// a fresh tape from the current parameter values.
inline double max_grad_rel_error(const std::function<Tensor(Tape&)>& build,
                                 const std::vector<Parameter*>& params,
                                 double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  std::vector<Array> analytic;
  {
    Tape tape;
    Tensor loss = build(tape);
    tape.backward(loss);
    for (Parameter* p : params) analytic.push_back(p->grad);
  }
  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      const double saved = p.value.data[k];
      p.value.data[k] = saved + h;
      double plus;
      {
        Tape tape;
        plus = build(tape).item();
      }
      p.value.data[k] = saved - h;
      double minus;
      {
        Tape tape;
        minus = build(tape).item();
      }
      p.value.data[k] = saved;
      const double fd = (plus - minus) / (2.0 * h);
      const double ad = analytic[pi].data[k];
      const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-6});
      worst = std::max(worst, std::fabs(fd - ad) / denom);
    }
  }
  return worst;
}

inline Array random_array(Shape s, Rng& rng, double scale = 1.0) {
  Array a = Array::zeros(s);
  for (auto& v : a.data) v = scale * (2.0 * rng.uniform() - 1.0);
  return a;
}

inline TokenSeq random_sentence(Rng& rng, int min_len = 1, int max_len = 12) {
  static const std::vector<std::string> kWords = {
      "a",   "the", "man",  "woman", "dog",  "cat",    "is",   "was",
      "on",  "in",  "runs", "running", "cooked", "cooking", "fast", "red",
      "ball", "grass", "kitchen", "road"};
  const int len =
      min_len + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - min_len + 1)));
  std::vector<std::string> words;
  for (int i = 0; i < len; ++i) {
    words.push_back(kWords[rng.below(kWords.size())]);
  }
  return TokenSeq(std::move(words));
}

}  // namespace dlnlab::testutil

#endif  // DLNLAB_TEST_UTIL_HPP
