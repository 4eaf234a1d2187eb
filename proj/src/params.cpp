#include "mcflow/params.hpp"

#include "mcflow/errors.hpp"

namespace mcflow {

int ParamLayout::add(std::string name, int rows, int cols) {
  if (rows <= 0 || cols <= 0)
    fail("tensor '" + name + "' has an empty shape");
  if (find(name) >= 0)
    fail("duplicate tensor name '" + name + "'");
  tensors_.push_back({std::move(name), total_, rows, cols});
  total_ += tensors_.back().size();
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamLayout::find(const std::string& name) const {
  for (size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name)
      return static_cast<int>(i);
  return -1;
}

} // namespace mcflow
