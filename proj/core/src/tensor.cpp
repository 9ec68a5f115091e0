#include "ourgan/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace ourgan {

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << "x";
        os << dims_[i];
    }
    os << "]";
    return os.str();
}

ImageTensor make_image(int64_t h, int64_t w, float fill) {
    return Tensor({3, h, w}, fill);
}

bool is_image(const Tensor& t) {
    return t.rank() == 3 && t.dim(0) == 3 && t.dim(1) >= 1 && t.dim(2) >= 1;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    const float* pb = b.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    const float* pb = b.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] -= pb[i];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out = a;
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] *= s;
    return out;
}

void clamp_(Tensor& t, float lo, float hi) {
    float* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = std::min(hi, std::max(lo, p[i]));
}

float mean_value(const Tensor& t) {
    if (t.numel() == 0) return 0.0f;
    double s = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) s += t[i];
    return static_cast<float>(s / static_cast<double>(t.numel()));
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "max_abs_diff: shape mismatch");
    float m = 0.0f;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

double mse(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "mse: shape mismatch");
    if (a.numel() == 0) return 0.0;
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

double rmse(const Tensor& a, const Tensor& b) { return std::sqrt(mse(a, b)); }

bool all_finite(const Tensor& t) {
    for (int64_t i = 0; i < t.numel(); ++i) {
        if (!std::isfinite(t[i])) return false;
    }
    return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<size_t>(a.numel())) == 0;
}

}  // namespace ourgan
