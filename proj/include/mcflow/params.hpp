// Flat parameter storage with named 2-D tensor views. Parameters, gradients,
// optimizer moments and EMA copies all share one layout, so optimizer code
// works on plain vectors.

#ifndef MCFLOW_PARAMS_HPP_
#define MCFLOW_PARAMS_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcflow {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

struct TensorInfo {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 0;

  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

class ParamLayout {
public:
  int add(std::string name, int rows, int cols);
  const TensorInfo& info(int id) const { return tensors_.at(id); }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  size_t total_size() const { return total_; }
  // -1 when absent
  int find(const std::string& name) const;

private:
  std::vector<TensorInfo> tensors_;
  size_t total_ = 0;
};

inline MatrixView view(std::vector<double>& buf, const TensorInfo& t) {
  return MatrixView(buf.data() + t.offset, t.rows, t.cols);
}
inline ConstMatrixView view(const std::vector<double>& buf, const TensorInfo& t) {
  return ConstMatrixView(buf.data() + t.offset, t.rows, t.cols);
}

} // namespace mcflow
#endif
