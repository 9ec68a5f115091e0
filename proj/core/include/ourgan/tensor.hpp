#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ourgan {

/// Error type thrown by all modules; the CLI maps it to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

/// Dense float32 tensor with value semantics. Layout is row-major over the
/// dims vector; networks use NCHW and images CHW with C == 3.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> dims) : dims_(std::move(dims)) {
        data_.assign(static_cast<size_t>(numel_of(dims_)), 0.0f);
    }
    Tensor(std::vector<int64_t> dims, float fill) : Tensor(std::move(dims)) {
        for (auto& v : data_) v = fill;
    }
    Tensor(std::vector<int64_t> dims, std::vector<float> values)
        : dims_(std::move(dims)), data_(std::move(values)) {
        check(static_cast<int64_t>(data_.size()) == numel_of(dims_),
              "tensor: value count does not match shape");
    }

    static Tensor zeros(std::vector<int64_t> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<int64_t> dims, float v) { return Tensor(std::move(dims), v); }
    static Tensor scalar(float v) { return Tensor({1}, std::vector<float>{v}); }

    const std::vector<int64_t>& dims() const { return dims_; }
    int64_t dim(size_t i) const { return dims_.at(i); }
    size_t rank() const { return dims_.size(); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // NCHW accessors.
    float& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>(((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w)];
    }
    float at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>(((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w)];
    }
    // CHW accessors for images.
    float& at(int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>((c * dims_[1] + h) * dims_[2] + w)];
    }
    float at(int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>((c * dims_[1] + h) * dims_[2] + w)];
    }

    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

    Tensor reshaped(std::vector<int64_t> dims) const {
        check(numel_of(dims) == numel(), "tensor: reshape changes element count");
        Tensor out = *this;
        out.dims_ = std::move(dims);
        return out;
    }

    static int64_t numel_of(const std::vector<int64_t>& dims) {
        int64_t n = 1;
        for (int64_t d : dims) {
            check(d >= 0, "tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::string shape_str() const;

private:
    std::vector<int64_t> dims_;
    std::vector<float> data_;
};

/// H x W x 3 image with values in [-1, 1], stored CHW as {3, H, W}.
using ImageTensor = Tensor;

inline int64_t image_height(const ImageTensor& img) { return img.dim(1); }
inline int64_t image_width(const ImageTensor& img) { return img.dim(2); }

ImageTensor make_image(int64_t h, int64_t w, float fill = 0.0f);
bool is_image(const Tensor& t);

// Elementwise helpers used across modules.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
void clamp_(Tensor& t, float lo, float hi);
float mean_value(const Tensor& t);
float max_abs_diff(const Tensor& a, const Tensor& b);
double mse(const Tensor& a, const Tensor& b);
double rmse(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace ourgan
