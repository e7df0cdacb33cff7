#include "icee/user_model.hpp"

#include <algorithm>
#include <numeric>

#include "icee/adam.hpp"
#include "icee/checkpoint.hpp"
#include "icee/explain.hpp"
#include "icee/ops.hpp"

namespace icee::user {

AnnotationSet simulate_annotations(const synth::DatasetSplit& split, synth::UserKind kind) {
    if (split.train.empty()) throw InvalidInput("simulate_annotations: training split has no images");
    AnnotationSet out;
    for (const auto& img : split.train) {
        if (!synth::is_valid(img.spec)) throw InvalidInput("simulate_annotations: image without a valid spec");
        out.emplace(img.id, synth::user_label(img.spec, kind));
    }
    return out;
}

Tensor image_scores(const Tensor& image, const target::ConvNetParams& target, const concepts::ConceptModel& model) {
    return concepts::concept_scores(target::forward(target, image).stack, model.bank);
}

Tensor scale_scores(const Tensor& scores, const Tensor& omega) {
    if (scores.rank() != 2 || omega.size() != scores.dim(0))
        throw InvalidInput("scale_scores: omega of size " + std::to_string(omega.size()) + " vs scores " +
                           shape_string(scores.shape()));
    Tensor out = scores;
    const std::size_t t = scores.dim(1);
    for (std::size_t j = 0; j < omega.size(); ++j)
        for (std::size_t i = 0; i < t; ++i) out.at(j, i) *= omega[j];
    return out;
}

Tensor user_logits(const Tensor& omega, const Tensor& scores, const concepts::ConceptModel& model) {
    return concepts::logits_from_scores(scale_scores(scores, omega), model.recon, model.head);
}

std::vector<double> user_dist_from_scores(const Tensor& omega, const Tensor& scores,
                                          const concepts::ConceptModel& model) {
    return softmax(user_logits(omega, scores, model).values());
}

std::vector<double> user_predict_dist(const Tensor& omega, const Tensor& image, const target::ConvNetParams& target,
                                      const concepts::ConceptModel& model, const std::optional<Tensor>& saliency) {
    if (!model.bank.trained) throw StateError("user_predict_dist: concept bank has not been trained");
    const Tensor input = saliency ? explain::apply_mask(image, *saliency) : image;
    return user_dist_from_scores(omega, image_scores(input, target, model), model);
}

OmegaGrad omega_loss_and_grad(const Tensor& omega, const Tensor& scores, std::size_t label,
                              const concepts::ConceptModel& model) {
    const Tensor logits = user_logits(omega, scores, model);
    const auto ce = cross_entropy_with_grad(logits.values(), label);
    OmegaGrad out;
    out.loss = ce.loss;
    out.probs = ce.grad;
    out.probs[label] += 1.0;

    const auto& w = model.recon.weights;
    const auto& h = model.head.weights;
    const std::size_t n = w.dim(0), m = w.dim(1), t = scores.dim(1), classes = h.dim(0);
    // d logits / d reconstructed position = H^T / T, identical for all positions.
    std::vector<double> g_pos(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += h.at(c, k) * ce.grad[c];
        g_pos[k] = s / static_cast<double>(t);
    }
    out.grad = Tensor({m});
    for (std::size_t j = 0; j < m; ++j) {
        double ds = 0.0;
        for (std::size_t k = 0; k < n; ++k) ds += w.at(k, j) * g_pos[k];
        double row = 0.0;
        for (std::size_t i = 0; i < t; ++i) row += scores.at(j, i);
        out.grad[j] = ds * row;
    }
    return out;
}

double agreement(const Tensor& omega, std::span<const Tensor> scores, std::span<const std::size_t> labels,
                 const concepts::ConceptModel& model) {
    if (scores.empty()) throw InvalidInput("agreement: no items");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        hits += argmax(user_logits(omega, scores[i], model).values()) == labels[i];
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

ExpertiseVector fit_omega(std::span<const Tensor> scores, std::span<const std::size_t> labels,
                          const concepts::ConceptModel& model, const FitHyper& hyper, std::uint64_t seed,
                          const Tensor& init) {
    if (scores.size() != labels.size()) throw InvalidInput("fit_omega: scores and labels differ in length");
    if (init.size() != model.bank.count()) throw InvalidInput("fit_omega: omega size does not match m");
    if (hyper.batch == 0) throw InvalidInput("fit_omega: batch must be positive");

    ExpertiseVector out;
    out.omega = init;
    out.seed = seed;
    out.epochs = hyper.epochs;
    if (scores.empty()) return out;

    RngStream order_rng = RngStream(seed).substream("user/order");
    AdamState state(init.shape(), AdamHyper{hyper.lr});
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(std::span(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t end = std::min(order.size(), start + hyper.batch);
            Tensor grad(init.shape());
            for (std::size_t b = start; b < end; ++b) {
                const auto g = omega_loss_and_grad(out.omega, scores[order[b]], labels[order[b]], model);
                epoch_loss += g.loss;
                for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g.grad[j];
            }
            for (double& v : grad.values()) v /= static_cast<double>(end - start);
            adam_step(out.omega, grad, state);
            for (double& v : out.omega.values()) v = std::clamp(v, 0.0, 1.0);
        }
        out.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    out.agreement = agreement(out.omega, scores, labels, model);
    return out;
}

ExpertiseVector fit_expertise(const synth::DatasetSplit& split, const AnnotationSet& annotations,
                              synth::UserKind kind, const target::ConvNetParams& target,
                              const concepts::ConceptModel& model, const FitHyper& hyper, std::uint64_t seed) {
    if (annotations.empty()) throw InvalidInput("fit_expertise: empty annotations");
    if (!model.bank.trained) throw StateError("fit_expertise: concept bank has not been trained");
    std::vector<Tensor> scores;
    std::vector<std::size_t> labels;
    for (const auto& img : split.train) {
        auto it = annotations.find(img.id);
        if (it == annotations.end()) continue;
        scores.push_back(image_scores(img.pixels, target, model));
        labels.push_back(it->second);
    }
    if (scores.size() != annotations.size())
        throw InvalidInput("fit_expertise: annotations reference images outside the training split");
    auto out = fit_omega(scores, labels, model, hyper, seed, Tensor({model.bank.count()}, 1.0));
    out.user = kind;
    return out;
}

ExpertiseVector retrain_from_scores(const ExpertiseVector& start, std::span<const Tensor> scores,
                                    std::span<const std::size_t> labels, const concepts::ConceptModel& model,
                                    const FitHyper& hyper, std::uint64_t seed) {
    if (scores.empty()) return start;
    auto out = fit_omega(scores, labels, model, hyper, seed, start.omega);
    out.user = start.user;
    return out;
}

ExpertiseVector retrain_user(const ExpertiseVector& start, std::span<const Example> examples,
                             const target::ConvNetParams& target, const concepts::ConceptModel& model,
                             const FitHyper& hyper, std::uint64_t seed, bool masked) {
    std::vector<Tensor> scores;
    std::vector<std::size_t> labels;
    for (const auto& ex : examples) {
        if (ex.image == nullptr) throw InvalidInput("retrain_user: example without an image");
        if (masked && ex.saliency == nullptr) throw InvalidInput("retrain_user: masked mode needs saliency maps");
        const Tensor input = masked ? explain::apply_mask(*ex.image, *ex.saliency) : *ex.image;
        scores.push_back(image_scores(input, target, model));
        labels.push_back(ex.label);
    }
    return retrain_from_scores(start, scores, labels, model, hyper, seed);
}

void save_user(const std::filesystem::path& dir, const ExpertiseVector& user) {
    nlohmann::json header{{"kind", "user"},
                          {"user", synth::to_string(user.user)},
                          {"seed", user.seed},
                          {"epochs", user.epochs},
                          {"loss_curve", user.loss_curve},
                          {"agreement", user.agreement}};
    save_checkpoint(dir, header, {{"omega", &user.omega}});
}

ExpertiseVector load_user(const std::filesystem::path& dir) {
    const auto ck = load_checkpoint(dir);
    if (ck.header.value("kind", "") != "user") throw IoError(dir.string() + " is not a user checkpoint");
    ExpertiseVector u;
    u.omega = ck.tensor("omega");
    u.user = synth::parse_user_kind(ck.header.at("user").get<std::string>());
    u.seed = ck.header.at("seed").get<std::uint64_t>();
    u.epochs = ck.header.at("epochs").get<std::size_t>();
    u.loss_curve = ck.header.at("loss_curve").get<std::vector<double>>();
    u.agreement = ck.header.at("agreement").get<double>();
    return u;
}

}  // namespace icee::user
