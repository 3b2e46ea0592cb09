#include "fcid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fcid/errors.hpp"

namespace fcid {

void CohortSpec::validate() const
{
    if (n_subjects < 1) throw ArgumentError("n_subjects must be >= 1");
    if (n_sessions != 2) throw ArgumentError("only test-retest cohorts (2 sessions) are supported");
    if (n_rois < 2) throw ArgumentError("n_rois must be >= 2");
    if (n_timepoints < n_rois + 2) throw ArgumentError("n_timepoints must be >= n_rois + 2");
    if (!(tr_seconds > 0.0)) throw ArgumentError("tr_seconds must be positive");
    if (!(subject_signal >= 0.0) || !(session_noise >= 0.0)) throw ArgumentError("noise parameters must be >= 0");
    if (informative_edge) {
        auto [a, b] = *informative_edge;
        if (a < 0 || b < 0 || a >= n_rois || b >= n_rois || a == b) throw ArgumentError("informative edge out of range");
    }
}

namespace {

Eigen::MatrixXd clip_psd(const Eigen::MatrixXd& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd symmetric(const Eigen::MatrixXd& a)
{
    return 0.5 * (a + a.transpose());
}

Eigen::VectorXd normal_vector(Eigen::Index n, Rng& rng)
{
    std::normal_distribution<double> dist;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
}

Eigen::MatrixXd base_structure(const CohortSpec& spec)
{
    // Three-factor model: moderate, heterogeneous shared correlations.
    auto rng = derive_rng(spec.seed, {0});
    const Eigen::Index c = spec.n_rois;
    std::normal_distribution<double> dist(0.0, 0.5);
    Eigen::MatrixXd loadings(c, 3);
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index f = 0; f < 3; ++f) loadings(i, f) = dist(rng);
    }
    Eigen::MatrixXd cov = loadings * loadings.transpose() + Eigen::MatrixXd::Identity(c, c);
    const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    if (spec.informative_edge) {
        // Decouple the pair so its 2x2 block can take any correlation in (-1, 1).
        for (int roi : {spec.informative_edge->first, spec.informative_edge->second}) {
            corr.row(roi).setZero();
            corr.col(roi).setZero();
            corr(roi, roi) = 1.0;
        }
    }
    return corr;
}

}  // namespace

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& a, const NearestCorrelationOptions& options)
{
    if (a.rows() != a.cols()) throw ShapeError("nearest_correlation needs a square matrix");
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd y = symmetric(a);
    y.diagonal().setOnes();
    Eigen::MatrixXd correction = Eigen::MatrixXd::Zero(n, n);
    for (int it = 0; it < options.max_iterations; ++it) {
        const Eigen::MatrixXd r = y - correction;
        const Eigen::MatrixXd x = clip_psd(r);
        correction = x - r;
        Eigen::MatrixXd next = x;
        next.diagonal().setOnes();
        const double change = (next - y).norm() / std::max(1.0, y.norm());
        y = std::move(next);
        if (change < options.tolerance) break;
    }
    Eigen::MatrixXd out = symmetric(clip_psd(y));
    const Eigen::VectorXd d = out.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(d(i) > 0.0)) throw DegenerateError("projection produced a zero-variance coordinate");
    }
    const Eigen::VectorXd inv_sd = d.cwiseSqrt().cwiseInverse();
    out = symmetric(inv_sd.asDiagonal() * out * inv_sd.asDiagonal());
    out.diagonal().setOnes();
    return out;
}

std::vector<Eigen::MatrixXd> generate_latent_connectomes(const CohortSpec& spec)
{
    spec.validate();
    const Eigen::MatrixXd base = base_structure(spec);
    const Eigen::Index c = spec.n_rois;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(spec.n_subjects));
    for (int s = 0; s < spec.n_subjects; ++s) {
        if (spec.subject_signal == 0.0) {
            out.push_back(base);
            continue;
        }
        auto rng = derive_rng(spec.seed, {1, static_cast<std::uint64_t>(s)});
        if (spec.informative_edge) {
            auto [a, b] = *spec.informative_edge;
            const double r = std::uniform_real_distribution<double>(-1.0, 1.0)(rng) * informative_edge_range * spec.subject_signal;
            Eigen::MatrixXd latent = base;
            latent(a, b) = latent(b, a) = std::clamp(r, -informative_edge_range, informative_edge_range);
            out.push_back(latent);
            continue;
        }
        const Eigen::VectorXd u = normal_vector(c, rng);
        const Eigen::VectorXd v = normal_vector(c, rng);
        Eigen::MatrixXd update = spec.subject_signal * perturbation_scale * (u * v.transpose() + v * u.transpose()) / std::sqrt(2.0);
        update.diagonal().setZero();
        out.push_back(nearest_correlation(base + update));
    }
    return out;
}

Eigen::MatrixXd perturb_session(const Eigen::MatrixXd& latent, const CohortSpec& spec, Rng& session_rng)
{
    if (spec.session_noise == 0.0) return latent;
    const Eigen::Index c = latent.rows();
    std::normal_distribution<double> dist;
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(c, c);
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = i + 1; j < c; ++j) noise(i, j) = noise(j, i) = dist(session_rng);
    }
    return nearest_correlation(latent + spec.session_noise * perturbation_scale * noise);
}

TimeSeriesMatrix sample_session_timeseries(const Eigen::MatrixXd& latent, const CohortSpec& spec, Rng& session_rng)
{
    Eigen::MatrixXd target = perturb_session(latent, spec, session_rng);
    const Eigen::Index c = target.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(target);
    double jitter = 1e-10;
    while (llt.info() != Eigen::Success) {
        if (jitter > 1e-3) throw DegenerateError("target correlation matrix cannot be factorized even with jitter");
        Eigen::MatrixXd bumped = target + jitter * Eigen::MatrixXd::Identity(c, c);
        bumped /= 1.0 + jitter;
        llt.compute(bumped);
        jitter *= 10.0;
    }
    const Eigen::MatrixXd l = llt.matrixL();
    std::normal_distribution<double> dist;
    Eigen::MatrixXd z(c, spec.n_timepoints);
    for (Eigen::Index t = 0; t < z.cols(); ++t) {
        for (Eigen::Index i = 0; i < c; ++i) z(i, t) = dist(session_rng);
    }
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < c; ++i) ids.push_back("roi" + std::to_string(i + 1));
    return TimeSeriesMatrix(l * z, std::move(ids), spec.tr_seconds);
}

Cohort generate_cohort(const CohortSpec& spec)
{
    spec.validate();
    Cohort out;
    out.latents = generate_latent_connectomes(spec);
    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < spec.n_subjects; ++s) {
        char subject[32];
        std::snprintf(subject, sizeof subject, "sub-%02d", s + 1);
        for (int session = 1; session <= 2; ++session) {
            auto rng = derive_rng(spec.seed, {2, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(session)});
            ScanRecord rec;
            rec.subject_id = subject;
            rec.session_index = session;
            rec.scan_id = std::string(subject) + "_ses-" + std::to_string(session);
            rec.tr_seconds = spec.tr_seconds;
            rec.path = std::filesystem::path("series") / (rec.scan_id + ".csv");
            rec.format = SourceFormat::csv;
            rec.n_timepoints = spec.n_timepoints;
            out.series.push_back(sample_session_timeseries(out.latents[static_cast<std::size_t>(s)], spec, rng));
            out.scans.push_back(std::move(rec));
        }
        pairs.emplace_back(2 * s, 2 * s + 1);
    }
    out.truth = Pairing::from_pairs(2 * spec.n_subjects, pairs);
    return out;
}

}  // namespace fcid
