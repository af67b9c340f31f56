#ifndef NSDYN_FAMILY_HPP
#define NSDYN_FAMILY_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "ratmap.hpp"

namespace nsdyn {

/// One-parameter family f_lambda with coefficients base + lambda * direction.
/// Builtins are named coefficient lines:
///   "quadratic"        z^2 + lambda
///   "lattes_scaled"    (1 + lambda) (z^2 - 2) / z^2
struct FamilySpec {
    enum class Kind { coefficient_line, builtin };

    Kind kind = Kind::coefficient_line;
    std::string name;
    RationalMap base;
    std::vector<std::complex<double>> direction; ///< (dp_0..dp_d, dq_0..dq_d)
    double domain_radius = 1;

    static FamilySpec coefficient_line(const RationalMap& base, std::vector<std::complex<double>> direction,
                                       double domain_radius)
    {
        FamilySpec s;
        s.kind = Kind::coefficient_line;
        s.name = "coefficient_line";
        s.base = base;
        s.direction = std::move(direction);
        s.domain_radius = domain_radius;
        s.validate();
        return s;
    }

    static FamilySpec builtin(const std::string& name, double domain_radius)
    {
        FamilySpec s;
        s.kind = Kind::builtin;
        s.name = name;
        s.domain_radius = domain_radius;
        if (name == "quadratic") {
            s.base = RationalMap({0, 0, 1}, {1, 0, 0});
            s.direction = {1, 0, 0, 0, 0, 0};
        } else if (name == "lattes_scaled") {
            s.base = RationalMap({-2, 0, 1}, {0, 0, 1});
            s.direction = {-2, 0, 1, 0, 0, 0};
        } else {
            fail(ErrorCode::invalid_argument, "unknown builtin family '" + name + "'");
        }
        s.validate();
        return s;
    }

    /// Coefficients at lambda, exactly affine: c_k = base_k + lambda * dir_k.
    std::vector<std::complex<double>> coefficients(std::complex<double> lambda) const
    {
        auto c = base.coefficients();
        for (std::size_t k = 0; k < c.size(); ++k)
            c[k] = c[k] + lambda * direction[k];
        return c;
    }

    /// f_lambda without the domain check (used internally for continuation and finite differences).
    RationalMap unchecked_member(std::complex<double> lambda) const
    {
        try {
            return RationalMap::from_coefficients(coefficients(lambda), base.degree());
        } catch (const Error& e) {
            fail(ErrorCode::degenerate_member, std::string("family member degenerate: ") + e.what());
        }
    }

private:
    void validate() const
    {
        require(direction.size() == 2 * static_cast<std::size_t>(base.degree()) + 2,
                "family direction must have 2d+2 entries");
        require(domain_radius >= 0 && std::isfinite(domain_radius), "domain radius must be finite and >= 0");
        unchecked_member(0);
        for (int k = 0; k < 64; ++k) {
            const auto lambda = std::polar(domain_radius, 2 * std::numbers::pi * k / 64.0);
            const auto m = unchecked_member(lambda);
            if (m.degree() != base.degree())
                fail(ErrorCode::degenerate_member, "family degree drops on the domain boundary");
        }
    }
};

inline RationalMap member(const FamilySpec& fam, std::complex<double> lambda)
{
    require(std::abs(lambda) <= fam.domain_radius * (1 + 1e-12), "parameter outside the family domain");
    auto m = fam.unchecked_member(lambda);
    if (m.degree() != fam.base.degree())
        fail(ErrorCode::degenerate_member, "degree drops at this parameter");
    return m;
}

} // namespace nsdyn

#endif
