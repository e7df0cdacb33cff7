#include "icee/concepts.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "icee/adam.hpp"
#include "icee/checkpoint.hpp"
#include "icee/ops.hpp"

namespace icee::concepts {
namespace {

void normalize_rows(Tensor& rows) {
    const std::size_t r = rows.dim(0), c = rows.dim(1);
    for (std::size_t i = 0; i < r; ++i) {
        std::span<double> row(rows.data() + i * c, c);
        const auto unit = l2_normalize(row);
        std::copy(unit.v.begin(), unit.v.end(), row.begin());
    }
}

// Principal directions of the per-image mean unit activations, largest
// variance first; each sign is fixed so the largest-magnitude entry is positive.
Tensor principal_directions(const std::vector<Eigen::VectorXd>& rows, std::size_t m) {
    const Eigen::Index n = rows.front().size();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    for (const auto& r : rows) mu += r;
    mu /= static_cast<double>(rows.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (const auto& r : rows) cov.noalias() += (r - mu) * (r - mu).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    Tensor out({m, static_cast<std::size_t>(n)});
    for (std::size_t j = 0; j < m; ++j) {
        Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - static_cast<Eigen::Index>(j));
        Eigen::Index big = 0;
        v.cwiseAbs().maxCoeff(&big);
        if (v[big] < 0) v = -v;
        for (Eigen::Index k = 0; k < n; ++k) out.at(j, static_cast<std::size_t>(k)) = v[k];
    }
    normalize_rows(out);
    return out;
}

// Least squares pooled_activation ~ W mean_scores + b with a tiny ridge.
ReconMap fit_reconstruction(const std::vector<Eigen::VectorXd>& mean_scores,
                            const std::vector<Eigen::VectorXd>& pooled) {
    const Eigen::Index m = mean_scores.front().size(), n = pooled.front().size();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(m + 1, n);
    Eigen::VectorXd z(m + 1);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        z << mean_scores[i], 1.0;
        gram.noalias() += z * z.transpose();
        cross.noalias() += z * pooled[i].transpose();
    }
    gram.diagonal().array() += 1e-8 * static_cast<double>(pooled.size());
    const Eigen::MatrixXd sol = gram.ldlt().solve(cross);  // (m + 1) x n
    ReconMap recon{Tensor({static_cast<std::size_t>(n), static_cast<std::size_t>(m)}),
                   Tensor({static_cast<std::size_t>(n)})};
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < m; ++j)
            recon.weights.at(static_cast<std::size_t>(k), static_cast<std::size_t>(j)) = sol(j, k);
        recon.bias[static_cast<std::size_t>(k)] = sol(m, k);
    }
    return recon;
}

}  // namespace

ConceptInit parse_concept_init(std::string_view name) {
    if (name == "pca") return ConceptInit::pca;
    if (name == "random") return ConceptInit::random;
    throw InvalidInput("unknown concept init '" + std::string(name) + "'");
}

std::string_view to_string(ConceptInit init) { return init == ConceptInit::pca ? "pca" : "random"; }

Tensor normalize_positions(const Tensor& stack) {
    if (stack.rank() != 2) throw InvalidInput("normalize_positions: stack must be T x n");
    Tensor out = stack;
    normalize_rows(out);
    return out;
}

Tensor concept_scores_normalized(const Tensor& unit_stack, const Tensor& concept_vectors) {
    if (unit_stack.rank() != 2 || concept_vectors.rank() != 2 || unit_stack.dim(1) != concept_vectors.dim(1))
        throw InvalidInput("concept_scores: stack " + shape_string(unit_stack.shape()) + " vs concepts " +
                           shape_string(concept_vectors.shape()));
    const std::size_t t = unit_stack.dim(0), n = unit_stack.dim(1), m = concept_vectors.dim(0);
    Tensor scores({m, t});
    for (std::size_t j = 0; j < m; ++j) {
        std::span<const double> c(concept_vectors.data() + j * n, n);
        for (std::size_t i = 0; i < t; ++i) scores.at(j, i) = dot(c, {unit_stack.data() + i * n, n});
    }
    return scores;
}

Tensor concept_scores(const Tensor& stack, const ConceptBank& bank) {
    return concept_scores_normalized(normalize_positions(stack), bank.vectors);
}

Tensor logits_from_scores(const Tensor& scores, const ReconMap& recon, const target::Head& head) {
    if (scores.rank() != 2 || recon.weights.rank() != 2 || recon.weights.dim(1) != scores.dim(0) ||
        recon.bias.size() != recon.weights.dim(0))
        throw InvalidInput("logits_from_scores: scores " + shape_string(scores.shape()) + " vs reconstruction " +
                           shape_string(recon.weights.shape()));
    const std::size_t m = scores.dim(0), t = scores.dim(1), n = recon.weights.dim(0);
    Tensor stack({t, n});
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            double v = recon.bias[k];
            for (std::size_t j = 0; j < m; ++j) v += recon.weights.at(k, j) * scores.at(j, i);
            stack.at(i, k) = v;
        }
    }
    return target::head_apply(stack, head);
}

Tensor conceptized_forward(const Tensor& image, const target::ConvNetParams& target, const ConceptModel& model) {
    if (!model.bank.trained) throw StateError("conceptized_forward: concept bank has not been trained");
    const auto fwd = target::forward(target, image);
    return logits_from_scores(concept_scores(fwd.stack, model.bank), model.recon, model.head);
}

ConceptGrads concept_loss_and_grads(const Tensor& unit_stack, std::size_t label, const Tensor& concept_vectors,
                                    const ReconMap& recon, const target::Head& head) {
    const Tensor scores = concept_scores_normalized(unit_stack, concept_vectors);
    ConceptGrads g;
    g.logits = logits_from_scores(scores, recon, head);
    const auto ce = cross_entropy_with_grad(g.logits.values(), label);
    g.loss = ce.loss;

    const std::size_t m = scores.dim(0), t = scores.dim(1), n = recon.weights.dim(0);
    const std::size_t classes = head.weights.dim(0);
    // Every position receives the same gradient: H^T dz / T.
    std::vector<double> g_pos(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += head.weights.at(c, k) * ce.grad[c];
        g_pos[k] = s / static_cast<double>(t);
    }

    g.weights = Tensor({n, m});
    g.bias = Tensor({n});
    g.concepts = Tensor({m, n});
    std::vector<double> score_sum(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < t; ++i) score_sum[j] += scores.at(j, i);
    for (std::size_t k = 0; k < n; ++k) {
        g.bias[k] = g_pos[k] * static_cast<double>(t);
        for (std::size_t j = 0; j < m; ++j) g.weights.at(k, j) = g_pos[k] * score_sum[j];
    }
    // dS[j, i] = (W^T g_pos)_j for every i, so dC_j = (W^T g_pos)_j * sum_i phi_i.
    std::vector<double> phi_sum(n, 0.0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t k = 0; k < n; ++k) phi_sum[k] += unit_stack.at(i, k);
    for (std::size_t j = 0; j < m; ++j) {
        double ds = 0.0;
        for (std::size_t k = 0; k < n; ++k) ds += recon.weights.at(k, j) * g_pos[k];
        for (std::size_t k = 0; k < n; ++k) g.concepts.at(j, k) = ds * phi_sum[k];
    }
    return g;
}

ConceptModel discover_concepts(const synth::DatasetSplit& split, const target::ConvNetParams& target,
                               const DiscoveryHyper& hyper, std::uint64_t seed) {
    const std::size_t n = target::kFeatures;
    if (hyper.m < 2) throw InvalidInput("discover_concepts: m must be >= 2");
    if (hyper.m > n) throw InvalidInput("discover_concepts: m = " + std::to_string(hyper.m) + " exceeds n = 64");
    if (split.train.empty()) throw InvalidInput("discover_concepts: empty training split");
    if (hyper.batch == 0 || hyper.epochs == 0) throw InvalidInput("discover_concepts: batch and epochs must be positive");

    // Target outputs are computed once; the extractor and head stay frozen.
    std::vector<Tensor> unit_stacks;
    std::vector<std::size_t> labels;
    std::vector<Tensor> pooled_stacks;
    Tensor mean_activation({n});
    for (const auto& img : split.train) {
        const auto fwd = target::forward(target, img.pixels);
        labels.push_back(argmax(fwd.logits.values()));
        pooled_stacks.push_back(target::pool_positions(fwd.stack));
        for (std::size_t k = 0; k < n; ++k) mean_activation[k] += pooled_stacks.back()[k];
        unit_stacks.push_back(normalize_positions(fwd.stack));
    }
    for (double& v : mean_activation.values()) v /= static_cast<double>(split.train.size());

    RngStream root(seed);
    RngStream init_rng = root.substream("concepts/init");
    RngStream order_rng = root.substream("concepts/order");

    ConceptModel model;
    model.hyper = hyper;
    model.seed = seed;
    model.head = target::head_of(target);
    if (hyper.init == ConceptInit::pca) {
        std::vector<Eigen::VectorXd> unit_means, pooled;
        for (std::size_t i = 0; i < unit_stacks.size(); ++i) {
            const Tensor u = target::pool_positions(unit_stacks[i]);
            unit_means.push_back(Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(n)));
            pooled.push_back(Eigen::Map<const Eigen::VectorXd>(pooled_stacks[i].data(), static_cast<Eigen::Index>(n)));
        }
        model.bank.vectors = principal_directions(unit_means, hyper.m);
        std::vector<Eigen::VectorXd> mean_scores;
        for (const auto& stack : unit_stacks) {
            const Tensor s = concept_scores_normalized(stack, model.bank.vectors);
            Eigen::VectorXd row_mean(static_cast<Eigen::Index>(hyper.m));
            for (std::size_t j = 0; j < hyper.m; ++j) {
                double total = 0.0;
                for (std::size_t i = 0; i < s.dim(1); ++i) total += s.at(j, i);
                row_mean[static_cast<Eigen::Index>(j)] = total / static_cast<double>(s.dim(1));
            }
            mean_scores.push_back(std::move(row_mean));
        }
        model.recon = fit_reconstruction(mean_scores, pooled);
    } else {
        model.bank.vectors = Tensor({hyper.m, n});
        for (double& v : model.bank.vectors.values()) v = init_rng.normal();
        normalize_rows(model.bank.vectors);
        model.recon.weights = Tensor({n, hyper.m});
        const double w_sd = 1.0 / std::sqrt(static_cast<double>(hyper.m));
        for (double& v : model.recon.weights.values()) v = w_sd * init_rng.normal();
        model.recon.bias = mean_activation;
    }

    const AdamHyper adam{hyper.lr};
    AdamState c_state(model.bank.vectors.shape(), adam);
    AdamState w_state(model.recon.weights.shape(), adam);
    AdamState b_state(model.recon.bias.shape(), adam);

    std::vector<std::size_t> order(unit_stacks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(std::span(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t end = std::min(order.size(), start + hyper.batch);
            Tensor gc(model.bank.vectors.shape()), gw(model.recon.weights.shape()), gb(model.recon.bias.shape());
            for (std::size_t b = start; b < end; ++b) {
                const auto g = concept_loss_and_grads(unit_stacks[order[b]], labels[order[b]], model.bank.vectors,
                                                      model.recon, model.head);
                epoch_loss += g.loss;
                for (std::size_t i = 0; i < gc.size(); ++i) gc[i] += g.concepts[i];
                for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += g.weights[i];
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.bias[i];
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (Tensor* t : {&gc, &gw, &gb})
                for (double& v : t->values()) v *= scale;
            adam_step(model.bank.vectors, gc, c_state);
            adam_step(model.recon.weights, gw, w_state);
            adam_step(model.recon.bias, gb, b_state);
            normalize_rows(model.bank.vectors);
        }
        model.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    model.bank.trained = true;
    if (!split.test.empty()) model.fidelity = fidelity(split.test, target, model);
    return model;
}

double fidelity(std::span<const synth::LabeledImage> images, const target::ConvNetParams& target,
                const ConceptModel& model) {
    if (images.empty()) throw InvalidInput("fidelity: no images");
    if (!model.bank.trained) throw StateError("fidelity: concept bank has not been trained");
    std::size_t agree = 0;
    for (const auto& img : images) {
        const auto fwd = target::forward(target, img.pixels);
        const Tensor logits = logits_from_scores(concept_scores(fwd.stack, model.bank), model.recon, model.head);
        agree += argmax(logits.values()) == argmax(fwd.logits.values());
    }
    return static_cast<double>(agree) / static_cast<double>(images.size());
}

void save_concepts(const std::filesystem::path& dir, const ConceptModel& model) {
    nlohmann::json header{{"kind", "concepts"},
                          {"m", model.hyper.m},
                          {"init", to_string(model.hyper.init)},
                          {"seed", model.seed},
                          {"lr", model.hyper.lr},
                          {"epochs", model.hyper.epochs},
                          {"batch", model.hyper.batch},
                          {"trained", model.bank.trained},
                          {"fidelity", model.fidelity},
                          {"epoch_losses", model.epoch_losses}};
    save_checkpoint(dir, header,
                    {{"C", &model.bank.vectors},
                     {"W", &model.recon.weights},
                     {"b", &model.recon.bias},
                     {"head_w", &model.head.weights},
                     {"head_b", &model.head.bias}});
}

ConceptModel load_concepts(const std::filesystem::path& dir) {
    const auto ck = load_checkpoint(dir);
    if (ck.header.value("kind", "") != "concepts") throw IoError(dir.string() + " is not a concept checkpoint");
    ConceptModel m;
    m.bank.vectors = ck.tensor("C");
    m.bank.trained = ck.header.at("trained").get<bool>();
    m.recon.weights = ck.tensor("W");
    m.recon.bias = ck.tensor("b");
    m.head.weights = ck.tensor("head_w");
    m.head.bias = ck.tensor("head_b");
    m.hyper.m = ck.header.at("m").get<std::size_t>();
    m.hyper.init = parse_concept_init(ck.header.value("init", "pca"));
    m.hyper.lr = ck.header.at("lr").get<double>();
    m.hyper.epochs = ck.header.at("epochs").get<std::size_t>();
    m.hyper.batch = ck.header.at("batch").get<std::size_t>();
    m.seed = ck.header.at("seed").get<std::uint64_t>();
    m.fidelity = ck.header.at("fidelity").get<double>();
    m.epoch_losses = ck.header.at("epoch_losses").get<std::vector<double>>();
    return m;
}

}  // namespace icee::concepts
