#ifndef PACVERIFY_LEARNER_DETAIL_HPP
#define PACVERIFY_LEARNER_DETAIL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pacverify/pac_learner.hpp"

namespace pacverify::detail {

// Column of Δ for one component (-1 = untargeted) over an outputs matrix.
Eigen::VectorXd component_target(const Eigen::MatrixXd& outputs, int label, int component);
Eigen::VectorXd draw_targets(Oracle& oracle, const Eigen::MatrixXd& points, int label, int component);

// Streams are keyed by the component's position in the component list.
std::uint64_t component_key(const LearnerConfig& config, std::size_t slot, StreamPurpose purpose,
                            std::uint64_t index);
std::size_t slot_of(const std::vector<int>& labels, int component);

FitResult checked_lp(const ChebyshevFitProblem& problem);

ComponentFit learn_component_slot(Oracle& oracle, const NormBallRegion& region, int label, int component,
                                  std::size_t slot, const LearnerConfig& config);
ComponentFit learn_stepwise_slot(Oracle& oracle, const NormBallRegion& region, int label, int component,
                                 std::size_t slot, const LearnerConfig& config);
AffinePacModel learn_model(Oracle& oracle, const NormBallRegion& region, int label,
                           const LearnerConfig& config, bool stepwise);

}  // namespace pacverify::detail

#endif  // PACVERIFY_LEARNER_DETAIL_HPP
