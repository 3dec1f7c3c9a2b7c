#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "havenet/adam.hpp"
#include "havenet/checkpoint.hpp"
#include "havenet/dataset.hpp"
#include "havenet/errors.hpp"
#include "havenet/gan.hpp"
#include "havenet/mlp.hpp"
#include "havenet/rng.hpp"
#include "havenet/tensor.hpp"

namespace havenet {

// Embedding network over fused feature rows.
struct Embedder {
    MlpNet net;
    std::size_t embed_dim = 0;
};

struct FslTrainConfig {
    std::size_t way = 5;
    std::size_t shot = 1;
    std::size_t query_per_class = 5;
    double lr = 1e-3;
    std::size_t epochs = 60;
    std::size_t episodes_per_epoch = 100;
    double lambda2 = 10.0;
    std::size_t n_times = 10;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;
    // last entry doubles as the embedding dimension
    std::vector<std::size_t> embed_hidden = {1024, 512};
    // jointly refine the GAN during meta-training instead of freezing it
    bool joint_gan = false;
    // augment episode support with hallucinated fused counterparts
    bool augment_hallucinated = false;
    // plain Euclidean instead of squared Euclidean prototype distance
    bool plain_euclidean = false;

    void validate() const {
        if (way < 1) throw ConfigError("fsl.way must be >= 1");
        if (shot < 1) throw ConfigError("fsl.shot must be >= 1");
        if (query_per_class < 1) throw ConfigError("fsl.query_per_class must be >= 1");
        if (lr <= 0.0) throw ConfigError("fsl.lr must be > 0");
        if (lambda2 < 0.0) throw ConfigError("fsl.lambda2 must be >= 0");
        if (lambda2 > 0.0 && n_times < 2)
            throw ConfigError("fsl.n_times must be >= 2 when lambda2 > 0");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigError("fsl.dropout_rate must be in [0,1)");
        if (embed_hidden.empty()) throw ConfigError("fsl.embed_hidden must be non-empty");
    }
};

inline Embedder make_embedder(std::size_t input_dim, const FslTrainConfig& cfg,
                              RngStream& rng) {
    cfg.validate();
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), cfg.embed_hidden.begin(), cfg.embed_hidden.end());
    std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
    Embedder emb;
    emb.net = make_mlp(sizes, acts, rng, cfg.dropout_rate);
    emb.embed_dim = sizes.back();
    return emb;
}

struct PrototypeSet {
    Tensor2 prototypes;              // way x embed_dim
    std::vector<int> class_of_slot;  // dataset class per episode slot
};

// Row-wise concatenation, audio columns first. The column order is fixed; it
// is baked into every trained checkpoint.
inline Tensor2 fuse(const Tensor2& audio, const Tensor2& visual) {
    return concat_rows(audio, visual);
}

namespace fsl_detail {

inline Tensor2 slot_means(const Tensor2& embeddings,
                          const std::vector<std::size_t>& slots, std::size_t way) {
    Tensor2 protos(way, embeddings.cols);
    std::vector<std::size_t> counts(way, 0);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        const std::size_t k = slots[i];
        for (std::size_t j = 0; j < embeddings.cols; ++j)
            protos.at(k, j) += embeddings.at(i, j);
        ++counts[k];
    }
    for (std::size_t k = 0; k < way; ++k) {
        if (counts[k] == 0)
            throw SamplingError("episode slot " + std::to_string(k) +
                                " has no support samples");
        for (std::size_t j = 0; j < protos.cols; ++j)
            protos.at(k, j) /= double(counts[k]);
    }
    return protos;
}

inline Tensor2 distances(const Tensor2& protos, const Tensor2& queries,
                         bool plain_euclidean) {
    Tensor2 d(queries.rows, protos.rows);
    for (std::size_t q = 0; q < queries.rows; ++q)
        for (std::size_t k = 0; k < protos.rows; ++k) {
            const double sq = squared_row_distance(queries, q, protos, k);
            d.at(q, k) = plain_euclidean ? std::sqrt(sq) : sq;
        }
    return d;
}

inline Tensor2 softmax_neg(const Tensor2& dist) {
    Tensor2 p(dist.rows, dist.cols);
    for (std::size_t q = 0; q < dist.rows; ++q) {
        double best = dist.at(q, 0);
        for (std::size_t k = 1; k < dist.cols; ++k) best = std::min(best, dist.at(q, k));
        double z = 0.0;
        for (std::size_t k = 0; k < dist.cols; ++k) {
            p.at(q, k) = std::exp(-(dist.at(q, k) - best));
            z += p.at(q, k);
        }
        for (std::size_t k = 0; k < dist.cols; ++k) p.at(q, k) /= z;
    }
    return p;
}

// Given dL/dprobs for one pass, push gradients back to the query embeddings
// and (additively) to the prototypes.
inline void probs_grad_to_embeddings(const Tensor2& probs, const Tensor2& prob_grad,
                                     const Tensor2& queries, const Tensor2& protos,
                                     const Tensor2& dist, bool plain_euclidean,
                                     Tensor2& query_grad, Tensor2& proto_grad) {
    const std::size_t K = protos.rows;
    for (std::size_t q = 0; q < queries.rows; ++q) {
        double dot = 0.0;
        for (std::size_t k = 0; k < K; ++k) dot += prob_grad.at(q, k) * probs.at(q, k);
        for (std::size_t k = 0; k < K; ++k) {
            // logits are -distance
            const double dl = probs.at(q, k) * (prob_grad.at(q, k) - dot);
            const double dd = -dl;
            double scale;
            if (plain_euclidean) {
                const double dist_qk = dist.at(q, k);
                scale = dist_qk > 0.0 ? dd / dist_qk : 0.0;
            } else {
                scale = 2.0 * dd;
            }
            if (scale == 0.0) continue;
            for (std::size_t j = 0; j < queries.cols; ++j) {
                const double diff = queries.at(q, j) - protos.at(k, j);
                query_grad.at(q, j) += scale * diff;
                proto_grad.at(k, j) -= scale * diff;
            }
        }
    }
}

}  // namespace fsl_detail

inline PrototypeSet compute_prototypes(const Embedder& emb, const Tensor2& support,
                                       const std::vector<std::size_t>& slots,
                                       std::size_t way,
                                       const std::vector<int>& class_of_slot = {}) {
    if (support.rows != slots.size())
        throw DimensionError("compute_prototypes: " + std::to_string(support.rows) +
                             " rows vs " + std::to_string(slots.size()) + " slots");
    const Tensor2 embeddings = forward(emb.net, support, ForwardMode::eval).output();
    PrototypeSet ps;
    ps.prototypes = fsl_detail::slot_means(embeddings, slots, way);
    ps.class_of_slot = class_of_slot;
    return ps;
}

inline Tensor2 proto_probs(const PrototypeSet& protos, const Tensor2& query_embeddings,
                           bool plain_euclidean = false) {
    if (query_embeddings.cols != protos.prototypes.cols)
        throw DimensionError("proto_probs: embed dims differ, " +
                             query_embeddings.shape_str() + " vs " +
                             protos.prototypes.shape_str());
    return fsl_detail::softmax_neg(
        fsl_detail::distances(protos.prototypes, query_embeddings, plain_euclidean));
}

inline double proto_loss(const Tensor2& probs, const std::vector<std::size_t>& slots) {
    if (probs.rows != slots.size())
        throw DimensionError("proto_loss: " + std::to_string(probs.rows) +
                             " prob rows vs " + std::to_string(slots.size()) +
                             " labels");
    double loss = 0.0;
    for (std::size_t q = 0; q < probs.rows; ++q)
        loss += -std::log(std::max(probs.at(q, slots[q]), 1e-300));
    return loss / double(probs.rows);
}

// Recorded dropout masks of the n_times stochastic passes; lets a caller
// re-evaluate the stochastic objective on the exact same path.
struct McMasks {
    std::vector<std::vector<Tensor2>> per_pass;
};

// Prediction-variance penalty: population std of each class probability over
// n_times dropout passes, averaged over classes, summed over queries.
inline double uncertainty_loss(const Embedder& emb, const PrototypeSet& protos,
                               const Tensor2& query, std::size_t n_times,
                               RngStream& rng, bool plain_euclidean = false,
                               McMasks* record = nullptr,
                               const McMasks* replay = nullptr) {
    if (n_times < 2) throw ConfigError("uncertainty_loss: n_times must be >= 2");
    const std::size_t nq = query.rows;
    const std::size_t K = protos.prototypes.rows;
    std::vector<Tensor2> pass_probs;
    if (record) record->per_pass.clear();
    for (std::size_t t = 0; t < n_times; ++t) {
        const std::vector<Tensor2>* fixed =
            replay ? &replay->per_pass[t] : nullptr;
        Tape tape = forward(emb.net, query, ForwardMode::train, &rng, fixed);
        if (record) record->per_pass.push_back(tape.dropout_masks);
        pass_probs.push_back(fsl_detail::softmax_neg(
            fsl_detail::distances(protos.prototypes, tape.output(), plain_euclidean)));
    }
    double loss = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
        double class_mean = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double mu = 0.0;
            for (std::size_t t = 0; t < n_times; ++t) mu += pass_probs[t].at(q, k);
            mu /= double(n_times);
            double var = 0.0;
            for (std::size_t t = 0; t < n_times; ++t) {
                const double d = pass_probs[t].at(q, k) - mu;
                var += d * d;
            }
            class_mean += std::sqrt(var / double(n_times));
        }
        loss += class_mean / double(K);
    }
    return loss;
}

struct LossComponents {
    double proto = 0.0;
    double std_penalty = 0.0;
    double cma = 0.0;
    double total = 0.0;
    double query_accuracy = 0.0;
};

// Raw modality blocks of the episode support, needed only when the GAN is
// jointly refined.
struct SupportModalities {
    Tensor2 audio;
    Tensor2 visual;
};

// Full episodic objective: prototypical NLL + lambda2 * variance penalty
// (+ the CMM-GAN term when joint refinement is on). With with_grads the
// embedder grads (and generator grads in joint mode) accumulate in place.
inline LossComponents episode_objective(Embedder& emb, const Tensor2& support,
                                        const std::vector<std::size_t>& support_slots,
                                        const Tensor2& query,
                                        const std::vector<std::size_t>& query_slots,
                                        std::size_t way, const FslTrainConfig& cfg,
                                        RngStream& rng, bool with_grads,
                                        CmmGan* gan = nullptr,
                                        const SupportModalities* raw = nullptr,
                                        const McMasks* replay_masks = nullptr) {
    const std::size_t E = emb.embed_dim;
    const std::size_t nq = query.rows;
    const bool euclid = cfg.plain_euclidean;

    // support path (eval mode: prototypes are deterministic)
    Tape support_tape = forward(emb.net, support, ForwardMode::eval);
    Tensor2 protos = fsl_detail::slot_means(support_tape.output(), support_slots, way);
    std::vector<std::size_t> slot_counts(way, 0);
    for (std::size_t s : support_slots) ++slot_counts[s];

    // query path (eval mode) for the prototypical term
    Tape query_tape = forward(emb.net, query, ForwardMode::eval);
    const Tensor2& query_emb = query_tape.output();
    Tensor2 dist = fsl_detail::distances(protos, query_emb, euclid);
    Tensor2 probs = fsl_detail::softmax_neg(dist);

    LossComponents out;
    out.proto = proto_loss(probs, query_slots);
    std::size_t correct = 0;
    for (std::size_t q = 0; q < nq; ++q) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < way; ++k)
            if (probs.at(q, k) > probs.at(q, best)) best = k;
        if (best == query_slots[q]) ++correct;
    }
    out.query_accuracy = double(correct) / double(nq);

    Tensor2 query_grad(nq, E), proto_grad(way, E);
    if (with_grads) {
        // d proto_loss / d probs, pushed through the softmax analytically
        Tensor2 prob_grad(nq, way);
        for (std::size_t q = 0; q < nq; ++q)
            prob_grad.at(q, query_slots[q]) =
                -1.0 / (double(nq) * std::max(probs.at(q, query_slots[q]), 1e-300));
        fsl_detail::probs_grad_to_embeddings(probs, prob_grad, query_emb, protos, dist,
                                             euclid, query_grad, proto_grad);
    }

    // variance penalty over stochastic passes
    std::vector<Tape> pass_tapes;
    std::vector<Tensor2> pass_probs, pass_dists;
    if (cfg.lambda2 > 0.0 && emb.net.dropout_rate > 0.0) {
        const std::size_t T = cfg.n_times;
        for (std::size_t t = 0; t < T; ++t) {
            const std::vector<Tensor2>* fixed =
                replay_masks ? &replay_masks->per_pass[t] : nullptr;
            pass_tapes.push_back(forward(emb.net, query, ForwardMode::train, &rng, fixed));
            pass_dists.push_back(
                fsl_detail::distances(protos, pass_tapes.back().output(), euclid));
            pass_probs.push_back(fsl_detail::softmax_neg(pass_dists.back()));
        }
        std::vector<Tensor2> pass_prob_grads(T, Tensor2(nq, way));
        for (std::size_t q = 0; q < nq; ++q) {
            double class_mean = 0.0;
            for (std::size_t k = 0; k < way; ++k) {
                double mu = 0.0;
                for (std::size_t t = 0; t < T; ++t) mu += pass_probs[t].at(q, k);
                mu /= double(T);
                double var = 0.0;
                for (std::size_t t = 0; t < T; ++t) {
                    const double d = pass_probs[t].at(q, k) - mu;
                    var += d * d;
                }
                const double sigma = std::sqrt(var / double(T));
                class_mean += sigma;
                // lambda2 folded in here so the shared proto_grad buffer and
                // the pass backward both carry it
                if (with_grads && sigma > 0.0)
                    for (std::size_t t = 0; t < T; ++t)
                        pass_prob_grads[t].at(q, k) =
                            cfg.lambda2 * (pass_probs[t].at(q, k) - mu) /
                            (double(T) * sigma * double(way));
            }
            out.std_penalty += class_mean / double(way);
        }
        if (with_grads) {
            for (std::size_t t = 0; t < T; ++t) {
                Tensor2 pass_query_grad(nq, E);
                fsl_detail::probs_grad_to_embeddings(
                    pass_probs[t], pass_prob_grads[t], pass_tapes[t].output(), protos,
                    pass_dists[t], euclid, pass_query_grad, proto_grad);
                backward(emb.net, pass_tapes[t], pass_query_grad);
            }
        }
    }

    // joint CMM-GAN refinement on the episode's support pairs
    if (cfg.joint_gan && gan != nullptr) {
        if (raw == nullptr)
            throw StateError("episode_objective: joint GAN needs raw support modalities");
        const GeneratorLoss g1 = generator_loss(*gan, GanDirection::audio_to_visual,
                                                raw->audio, raw->visual, rng, with_grads);
        const GeneratorLoss g2 = generator_loss(*gan, GanDirection::visual_to_audio,
                                                raw->visual, raw->audio, rng, with_grads);
        out.cma = g1.total + g2.total;
    }

    if (with_grads) {
        backward(emb.net, query_tape, query_grad);
        // prototype grads reach the support embeddings through the slot mean
        Tensor2 support_grad(support.rows, E);
        for (std::size_t i = 0; i < support.rows; ++i) {
            const std::size_t k = support_slots[i];
            const double inv = 1.0 / double(slot_counts[k]);
            for (std::size_t j = 0; j < E; ++j)
                support_grad.at(i, j) += proto_grad.at(k, j) * inv;
        }
        backward(emb.net, support_tape, support_grad);
    }

    out.total = out.proto + cfg.lambda2 * out.std_penalty + out.cma;
    return out;
}

struct Prediction {
    std::vector<std::size_t> labels;  // episode-local slots, lowest-slot tie-break
    Tensor2 mean_probs;
};

// Classify fused queries against the prototypes. With n_times >= 2 and active
// dropout the softmax is averaged over stochastic passes; otherwise a single
// deterministic eval pass.
inline Prediction predict(const Embedder& emb, const PrototypeSet& protos,
                          const Tensor2& query, std::size_t n_times, RngStream& rng,
                          bool plain_euclidean = false) {
    const std::size_t K = protos.prototypes.rows;
    Prediction pred;
    if (n_times >= 2 && emb.net.dropout_rate > 0.0) {
        pred.mean_probs = Tensor2(query.rows, K);
        for (std::size_t t = 0; t < n_times; ++t) {
            Tape tape = forward(emb.net, query, ForwardMode::train, &rng);
            axpy(pred.mean_probs, 1.0,
                 fsl_detail::softmax_neg(fsl_detail::distances(
                     protos.prototypes, tape.output(), plain_euclidean)));
        }
        for (auto& v : pred.mean_probs.data) v /= double(n_times);
    } else {
        const Tensor2 embq = forward(emb.net, query, ForwardMode::eval).output();
        pred.mean_probs = fsl_detail::softmax_neg(
            fsl_detail::distances(protos.prototypes, embq, plain_euclidean));
    }
    for (std::size_t q = 0; q < query.rows; ++q) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < K; ++k)
            if (pred.mean_probs.at(q, k) > pred.mean_probs.at(q, best)) best = k;
        pred.labels.push_back(best);
    }
    return pred;
}

struct TrainHistory {
    std::vector<double> loss_total, loss_proto, loss_std, train_acc;

    void write_csv(std::ostream& os) const {
        os << "epoch,loss_total,loss_proto,loss_std,train_acc\n";
        for (std::size_t e = 0; e < loss_total.size(); ++e)
            os << e << ',' << loss_total[e] << ',' << loss_proto[e] << ','
               << loss_std[e] << ',' << train_acc[e] << '\n';
    }
};

// Maps dataset rows of an episode to the model's input row. The default
// meta-training view is real fused [audio ; visual].
using FeatureView = std::function<Tensor2(
    const Dataset&, const std::vector<std::pair<std::size_t, std::size_t>>&)>;

inline FeatureView fused_real_view() {
    return [](const Dataset& ds,
              const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
        return fuse(gather_audio(ds, refs), gather_visual(ds, refs));
    };
}

// Base classes with enough samples for one episode; throws if fewer than
// `way` qualify.
inline std::set<int> feasible_classes(const Dataset& ds, const std::set<int>& classes,
                                      const FslTrainConfig& cfg) {
    const std::size_t need = cfg.shot + cfg.query_per_class;
    std::set<int> ok;
    for (int cls : classes)
        if (ds.by_class[std::size_t(cls)].size() >= need) ok.insert(cls);
    if (ok.size() < cfg.way)
        throw ConfigError("episode spec infeasible: " + std::to_string(ok.size()) +
                          " classes have >= " + std::to_string(need) +
                          " samples, need " + std::to_string(cfg.way));
    return ok;
}

// Episodic meta-training over base classes. One Adam step on the total
// objective per episode; history carries per-epoch means.
inline TrainHistory meta_train(Embedder& emb, const Dataset& ds, const SplitSpec& split,
                               const FslTrainConfig& cfg, CmmGan* gan = nullptr,
                               const FeatureView& view = {}) {
    cfg.validate();
    const std::set<int> classes = feasible_classes(ds, split.base_classes, cfg);
    const FeatureView make_rows = view ? view : fused_real_view();

    RngStream master = RngStream(cfg.seed).derive("meta-train");
    AdamState opt = AdamState::for_net(emb.net, cfg.lr);
    // joint refinement gets its own optimizer set; untouched when frozen
    AdamState opt_g1, opt_g2, opt_d1, opt_d2;
    if (cfg.joint_gan && gan) {
        opt_g1 = AdamState::for_net(gan->g1, cfg.lr);
        opt_g2 = AdamState::for_net(gan->g2, cfg.lr);
        opt_d1 = AdamState::for_net(gan->d1, cfg.lr);
        opt_d2 = AdamState::for_net(gan->d2, cfg.lr);
    }

    TrainHistory history;
    std::uint64_t episode_index = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double sum_total = 0, sum_proto = 0, sum_std = 0, sum_acc = 0;
        for (std::size_t e = 0; e < cfg.episodes_per_epoch; ++e, ++episode_index) {
            RngStream rng = master.derive(episode_index);
            Episode ep = sample_episode(ds, classes, cfg.way, cfg.shot,
                                        cfg.query_per_class, rng);
            Tensor2 support = make_rows(ds, ep.support);
            std::vector<std::size_t> support_slots = gather_slots(ep.support);
            const Tensor2 query = make_rows(ds, ep.query);
            const std::vector<std::size_t> query_slots = gather_slots(ep.query);

            SupportModalities raw;
            const bool need_raw =
                (cfg.joint_gan || cfg.augment_hallucinated) && gan != nullptr;
            if (need_raw) {
                raw.audio = gather_audio(ds, ep.support);
                raw.visual = gather_visual(ds, ep.support);
            }
            if (cfg.augment_hallucinated && gan != nullptr) {
                // prototype-shift augmentation: each support pair contributes
                // two extra fused rows built from mean-mode hallucinations
                const Tensor2 hal_v = hallucinate(*gan, GanDirection::audio_to_visual,
                                                  raw.audio, rng, HallucMode::mean);
                const Tensor2 hal_a = hallucinate(*gan, GanDirection::visual_to_audio,
                                                  raw.visual, rng, HallucMode::mean);
                Tensor2 extra1 = fuse(raw.audio, hal_v);
                Tensor2 extra2 = fuse(hal_a, raw.visual);
                for (std::size_t i = 0; i < extra1.rows; ++i) {
                    support.data.insert(support.data.end(),
                                        extra1.data.begin() + long(i * extra1.cols),
                                        extra1.data.begin() + long((i + 1) * extra1.cols));
                    support_slots.push_back(support_slots[i]);
                }
                for (std::size_t i = 0; i < extra2.rows; ++i) {
                    support.data.insert(support.data.end(),
                                        extra2.data.begin() + long(i * extra2.cols),
                                        extra2.data.begin() + long((i + 1) * extra2.cols));
                    support_slots.push_back(support_slots[i]);
                }
                support.rows = support_slots.size();
            }

            emb.net.zero_grads();
            if (cfg.joint_gan && gan) {
                gan->g1.zero_grads();
                gan->g2.zero_grads();
            }
            const LossComponents loss = episode_objective(
                emb, support, support_slots, query, query_slots, cfg.way, cfg, rng,
                /*with_grads=*/true, gan, need_raw ? &raw : nullptr);
            if (!std::isfinite(loss.total))
                throw StateError("non-finite loss at epoch " + std::to_string(epoch) +
                                 " episode " + std::to_string(e));
            adam_step(opt, emb.net);
            if (cfg.joint_gan && gan) {
                adam_step(opt_g1, gan->g1);
                adam_step(opt_g2, gan->g2);
                gan->d1.zero_grads();
                discriminator_loss(*gan, GanDirection::audio_to_visual, raw.visual,
                                   raw.audio, rng, true);
                adam_step(opt_d1, gan->d1);
                gan->d2.zero_grads();
                discriminator_loss(*gan, GanDirection::visual_to_audio, raw.audio,
                                   raw.visual, rng, true);
                adam_step(opt_d2, gan->d2);
            }
            sum_total += loss.total;
            sum_proto += loss.proto;
            sum_std += loss.std_penalty;
            sum_acc += loss.query_accuracy;
        }
        const double inv =
            cfg.episodes_per_epoch ? 1.0 / double(cfg.episodes_per_epoch) : 0.0;
        history.loss_total.push_back(sum_total * inv);
        history.loss_proto.push_back(sum_proto * inv);
        history.loss_std.push_back(sum_std * inv);
        history.train_acc.push_back(sum_acc * inv);
    }
    return history;
}

inline void save_embedder(const Embedder& emb, const std::string& dir,
                          const FslTrainConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    ckpt::save_net(emb.net, (fs::path(dir) / "embedder.hvnc").string());
    nlohmann::json manifest{{"embed_dim", emb.embed_dim},
                            {"input_dim", emb.net.input_dim()},
                            {"dropout_rate", emb.net.dropout_rate},
                            {"n_times", cfg.n_times},
                            {"lambda2", cfg.lambda2},
                            {"plain_euclidean", cfg.plain_euclidean},
                            {"seed", cfg.seed}};
    std::ofstream os(fs::path(dir) / "embedder_manifest.json");
    if (!os) throw FormatError("cannot write embedder manifest in '" + dir + "'", 0);
    os << manifest.dump(2) << '\n';
}

inline Embedder load_embedder(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream ms(fs::path(dir) / "embedder_manifest.json");
    if (!ms) throw FormatError("cannot open embedder manifest in '" + dir + "'", 0);
    nlohmann::json manifest = nlohmann::json::parse(ms);
    Embedder emb;
    emb.net = ckpt::load_net((fs::path(dir) / "embedder.hvnc").string());
    emb.net.dropout_rate = manifest.at("dropout_rate").get<double>();
    emb.embed_dim = manifest.at("embed_dim").get<std::size_t>();
    if (emb.embed_dim != emb.net.output_dim())
        throw FormatError("embedder manifest embed_dim does not match checkpoint", 0);
    return emb;
}

}  // namespace havenet
