#include "fsde/quad.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "fsde/errors.hpp"

namespace fsde::quad {

namespace {

// Newton iteration on the Legendre recurrence; nodes accurate to ~1 ulp.
GlRule build_rule(int n) {
    GlRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const long double pi = 3.14159265358979323846264338327950288L;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        long double x = std::cos(pi * (i + 0.75L) / (n + 0.5L));
        long double dp = 0.0L;
        for (int it = 0; it < 100; ++it) {
            long double p0 = 1.0L, p1 = x;
            for (int k = 2; k <= n; ++k) {
                long double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0L);
            long double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-19L) break;
        }
        long double w = 2.0L / ((1.0L - x * x) * dp * dp);
        r.nodes[i] = static_cast<double>(-x);
        r.nodes[n - 1 - i] = static_cast<double>(x);
        r.weights[i] = static_cast<double>(w);
        r.weights[n - 1 - i] = static_cast<double>(w);
    }
    return r;
}

}  // namespace

const GlRule& gl_rule(int n) {
    if (n < 1 || n > 256) throw InvalidParams("gl_rule: node count out of range");
    static std::map<int, GlRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
    return it->second;
}

}  // namespace fsde::quad
