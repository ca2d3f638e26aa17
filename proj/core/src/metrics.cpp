#include "dualline/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dualline {

namespace {

double centered_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i] - ma;
        const double y = b[i] - mb;
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

std::vector<double> region_values(const Tensor& image, const ToyWorld& world,
                                  bool inside_face) {
    if (image.shape() != Shape{world.channels, world.height, world.width}) {
        throw std::invalid_argument("score: sample shape " + shape_str(image.shape()) +
                                    " does not match the world");
    }
    std::vector<double> out;
    for (std::size_t c = 0; c < world.channels; ++c) {
        for (std::size_t r = 0; r < world.height; ++r) {
            for (std::size_t col = 0; col < world.width; ++col) {
                if (world.face.contains(r, col) == inside_face) {
                    out.push_back(image[(c * world.height + r) * world.width + col]);
                }
            }
        }
    }
    return out;
}

}  // namespace

double identity_score(const Tensor& sample, const ToyWorld& world, std::size_t identity) {
    if (identity >= world.num_identities()) {
        throw std::invalid_argument("identity_score: identity index out of range");
    }
    return centered_cosine(region_values(sample, world, true),
                           region_values(world.signatures[identity], world, true));
}

double semantic_score(const Tensor& sample, const ToyWorld& world, std::size_t scene) {
    if (scene >= world.num_scenes()) {
        throw std::invalid_argument("semantic_score: scene index out of range");
    }
    return centered_cosine(region_values(sample, world, false),
                           region_values(world.templates[scene], world, false));
}

}  // namespace dualline
