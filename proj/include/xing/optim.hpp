#pragma once

// Adam with bias correction. Moments are float tensors so they serialize in
// checkpoints unchanged; the per-element update runs in double.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "xing/autograd.hpp"

namespace xing {

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void attach(std::vector<Var<float>> params) {
        params_ = std::move(params);
        m_.clear();
        v_.clear();
        for (const Var<float>& p : params_) {
            m_.push_back(Tensor<float>::zeros(p.value().shape));
            v_.push_back(Tensor<float>::zeros(p.value().shape));
        }
        t_ = 0;
    }

    // One update from the gradients accumulated on the attached parameters.
    // The caller still owns zeroing the gradients afterwards.
    void step() {
        if (params_.empty()) throw std::logic_error("Adam::step before attach");
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const Tensor<float>& g = params_[i].grad();
            Tensor<float>& x = params_[i].mutable_value();
            Tensor<float>& m = m_[i];
            Tensor<float>& v = v_[i];
            for (std::size_t k = 0; k < x.numel(); ++k) {
                double gk = static_cast<double>(g.data[k]);
                double mk = beta1_ * static_cast<double>(m.data[k]) + (1.0 - beta1_) * gk;
                double vk = beta2_ * static_cast<double>(v.data[k]) + (1.0 - beta2_) * gk * gk;
                m.data[k] = static_cast<float>(mk);
                v.data[k] = static_cast<float>(vk);
                double mhat = mk / bc1;
                double vhat = vk / bc2;
                x.data[k] = static_cast<float>(static_cast<double>(x.data[k]) -
                                               lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    std::size_t size() const { return params_.size(); }
    const Var<float>& param(std::size_t i) const { return params_[i]; }
    Tensor<float>& moment_m(std::size_t i) { return m_[i]; }
    Tensor<float>& moment_v(std::size_t i) { return v_[i]; }
    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Var<float>> params_;
    std::vector<Tensor<float>> m_, v_;
};

}  // namespace xing
