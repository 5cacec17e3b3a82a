#include "scogait/optim.hpp"

namespace scogait {

template <typename T>
Sgd<T>::Sgd(std::vector<Param<T>*> params, SgdOptions options)
    : params_(std::move(params)), options_(options) {
  for (auto* p : params_) velocity_.emplace_back(p->value.shape());
}

template <typename T>
void Sgd<T>::step(double lr) {
  const T mu = static_cast<T>(options_.momentum);
  const T wd = static_cast<T>(options_.weight_decay);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param<T>& p = *params_[i];
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* v = velocity_[i].data();
    const bool decay = p.decay && options_.weight_decay != 0.0;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T d = decay ? g[k] + wd * w[k] : g[k];
      v[k] = started_ ? mu * v[k] + d : d;
      w[k] -= rate * (options_.momentum != 0.0 ? v[k] : d);
    }
  }
  started_ = true;
}

template class Sgd<float>;
template class Sgd<double>;

}  // namespace scogait
