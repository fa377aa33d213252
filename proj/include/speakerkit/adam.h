// speakerkit/adam.h

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEAKERKIT_ADAM_H_
#define SPEAKERKIT_ADAM_H_

#include <cmath>
#include <cstdint>
#include <vector>

#include "speakerkit/errors.h"
#include "speakerkit/tensor.h"

namespace speakerkit {

// Adam with bias correction.  Weight decay enters as a classic L2 term added
// to the gradient before the moment updates, not as decoupled decay.
// Parameters whose gradient is absent (unreachable from the loss) are left
// untouched, including by weight decay.
template <typename T>
class AdamOptimizer {
 public:
  struct State {
    std::vector<T> m;
    std::vector<T> v;
  };

  AdamOptimizer(T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  std::int64_t step_count() const { return step_; }

  void zero_grad(std::vector<Parameter<T>>& params) {
    for (auto& p : params) p.tensor.zero_grad();
  }

  void step(std::vector<Parameter<T>>& params, T lr, T weight_decay) {
    if (lr <= T(0)) {
      throw ParameterError("adam: learning rate must be positive, got " +
                           std::to_string(static_cast<double>(lr)));
    }
    if (states_.size() != params.size()) states_.resize(params.size());
    ++step_;
    const T bc1 = T(1) - std::pow(beta1_, T(step_));
    const T bc2 = T(1) - std::pow(beta2_, T(step_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Tensor<T>& t = params[pi].tensor;
      if (!t.has_grad()) continue;
      auto& data = t.data();
      const auto& grad = t.grad();
      State& st = states_[pi];
      if (st.m.empty()) {
        st.m.assign(data.size(), T(0));
        st.v.assign(data.size(), T(0));
      }
      for (std::size_t i = 0; i < data.size(); ++i) {
        const T g = grad[i] + weight_decay * data[i];
        st.m[i] = beta1_ * st.m[i] + (T(1) - beta1_) * g;
        st.v[i] = beta2_ * st.v[i] + (T(1) - beta2_) * g * g;
        const T mhat = st.m[i] / bc1;
        const T vhat = st.v[i] / bc2;
        data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  T beta1_, beta2_, eps_;
  std::int64_t step_ = 0;
  std::vector<State> states_;
};

}  // namespace speakerkit

#endif  // SPEAKERKIT_ADAM_H_
