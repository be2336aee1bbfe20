#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bookcell {

/// Dimensions of the per-cell one-hidden-layer network.
///
/// Inputs, per connection slot k: S, L, E received from the neighbour at
/// 3k, 3k+1, 3k+2; then the red, green, blue light ratios and the touch flag.
/// Outputs mirror the slot block and end with READ, EAT, FUSION, LIGHT.
struct NetShape
{
    std::size_t n_slots = 6;
    std::size_t n_hidden = 8;

    constexpr std::size_t n_in() const noexcept { return 3 * n_slots + 4; }
    constexpr std::size_t n_out() const noexcept { return 3 * n_slots + 4; }
    constexpr std::size_t weight_count() const noexcept
    {
        return (n_in() + 1) * n_hidden + (n_hidden + 1) * n_out();
    }

    constexpr std::size_t in_s(std::size_t slot) const noexcept { return 3 * slot; }
    constexpr std::size_t in_l(std::size_t slot) const noexcept { return 3 * slot + 1; }
    constexpr std::size_t in_e(std::size_t slot) const noexcept { return 3 * slot + 2; }
    constexpr std::size_t in_light(std::size_t channel) const noexcept { return 3 * n_slots + channel; }
    constexpr std::size_t in_touch() const noexcept { return 3 * n_slots + 3; }

    constexpr std::size_t out_s(std::size_t slot) const noexcept { return 3 * slot; }
    constexpr std::size_t out_l(std::size_t slot) const noexcept { return 3 * slot + 1; }
    constexpr std::size_t out_e(std::size_t slot) const noexcept { return 3 * slot + 2; }
    constexpr std::size_t out_read() const noexcept { return 3 * n_slots; }
    constexpr std::size_t out_eat() const noexcept { return 3 * n_slots + 1; }
    constexpr std::size_t out_fusion() const noexcept { return 3 * n_slots + 2; }
    constexpr std::size_t out_light() const noexcept { return 3 * n_slots + 3; }

    friend constexpr bool operator==(const NetShape&, const NetShape&) = default;
};

/// Fixed-weight network decoded from the genome.
///
/// Weight layout: n_hidden rows of (n_in inputs, bias), then n_out rows of
/// (n_hidden hidden units, bias). Weights never change after construction.
class NeuralNet
{
  public:
    NeuralNet() = default;
    /// Throws ShapeError when the weight count does not match `shape`.
    NeuralNet(NetShape shape, std::vector<double> weights);

    const NetShape& shape() const noexcept { return shape_; }
    std::span<const double> weights() const noexcept { return weights_; }

    /// hidden = tanh(W1 [x; 1]), out = tanh(W2 [hidden; 1]).
    std::vector<double> forward(std::span<const double> inputs) const;

    /// Allocation-free variant; `hidden` must hold n_hidden values.
    void forward_into(std::span<const double> inputs, std::span<double> hidden, std::span<double> outputs) const;

  private:
    NetShape shape_{};
    std::vector<double> weights_;
};

/// Simplified Hebb rule: S'(t+dt) = S'(t) + delta_s * S(t).
constexpr double hebb_update(double s_prime, double s_out, double delta_s) noexcept
{
    return s_prime + delta_s * s_out;
}

/// What a connected neighbour sends to this cell through one slot.
struct SlotSignal
{
    double s_out = 0.0;
    double l_out = 0.0;
    double e_out = 0.0;
};

/// Builds the input vector for one cell.
///
/// `slots[k]` is the neighbour signal for slot k (empty when unoccupied) and
/// `coupling[k]` the cell's S' for that slot. Raw light intensities are
/// normalised to ratios. Throws CapacityError if more slots are supplied
/// than the shape has.
std::vector<double> gather_inputs(const NetShape& shape, std::span<const std::optional<SlotSignal>> slots,
                                  std::span<const double> coupling, const std::array<double, 3>& light,
                                  bool touched);

/// Normalises a light sample to colour ratios; zero light gives zero ratios.
std::array<double, 3> light_ratios(const std::array<double, 3>& light) noexcept;

} // namespace bookcell
