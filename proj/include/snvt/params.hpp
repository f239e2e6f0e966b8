#pragma once

#include <string>

#include "snvt/tensor.hpp"

namespace snvt {

// Named reference into a model's parameter storage.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor = nullptr;
};

}  // namespace snvt
