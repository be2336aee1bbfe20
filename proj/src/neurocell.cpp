#include "bookcell/neurocell.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "bookcell/errors.hpp"

namespace bookcell {

NeuralNet::NeuralNet(NetShape shape, std::vector<double> weights)
    : shape_(shape), weights_(std::move(weights))
{
    if (weights_.size() != shape_.weight_count())
        throw ShapeError("network expects " + std::to_string(shape_.weight_count()) + " weights, got " +
                         std::to_string(weights_.size()));
}

std::vector<double> NeuralNet::forward(std::span<const double> inputs) const
{
    std::vector<double> hidden(shape_.n_hidden);
    std::vector<double> out(shape_.n_out());
    forward_into(inputs, hidden, out);
    return out;
}

void NeuralNet::forward_into(std::span<const double> inputs, std::span<double> hidden, std::span<double> outputs) const
{
    const std::size_t n_in = shape_.n_in();
    const std::size_t n_h = shape_.n_hidden;
    if (inputs.size() != n_in)
        throw ShapeError("network expects " + std::to_string(n_in) + " inputs, got " + std::to_string(inputs.size()));
    if (hidden.size() != n_h || outputs.size() != shape_.n_out())
        throw ShapeError("network scratch buffers have the wrong size");

    constexpr std::size_t stack_inputs = 64;
    std::size_t active_buf[stack_inputs];
    std::vector<std::size_t> active_heap;
    std::size_t* active = active_buf;
    if (n_in > stack_inputs) {
        active_heap.resize(n_in);
        active = active_heap.data();
    }
    std::size_t n_active = 0;
    for (std::size_t i = 0; i < n_in; ++i)
        if (inputs[i] != 0.0)
            active[n_active++] = i;

    const double* w = weights_.data();
    for (std::size_t h = 0; h < n_h; ++h, w += n_in + 1) {
        double acc = w[n_in];
        for (std::size_t a = 0; a < n_active; ++a)
            acc += w[active[a]] * inputs[active[a]];
        hidden[h] = std::tanh(acc);
    }
    for (std::size_t o = 0; o < outputs.size(); ++o, w += n_h + 1) {
        double acc = w[n_h];
        for (std::size_t h = 0; h < n_h; ++h)
            acc += w[h] * hidden[h];
        outputs[o] = std::tanh(acc);
    }
}

std::array<double, 3> light_ratios(const std::array<double, 3>& light) noexcept
{
    const double sum = light[0] + light[1] + light[2];
    if (!(sum > 0.0))
        return {0.0, 0.0, 0.0};
    return {light[0] / sum, light[1] / sum, light[2] / sum};
}

std::vector<double> gather_inputs(const NetShape& shape, std::span<const std::optional<SlotSignal>> slots,
                                  std::span<const double> coupling, const std::array<double, 3>& light,
                                  bool touched)
{
    if (slots.size() > shape.n_slots)
        throw CapacityError("cell has " + std::to_string(slots.size()) + " slots, network supports " +
                            std::to_string(shape.n_slots));
    if (coupling.size() < slots.size())
        throw ShapeError("missing coupling strength for an occupied slot");

    std::vector<double> in(shape.n_in(), 0.0);
    for (std::size_t k = 0; k < slots.size(); ++k) {
        if (!slots[k])
            continue;
        in[shape.in_s(k)] = slots[k]->s_out * coupling[k];
        in[shape.in_l(k)] = slots[k]->l_out;
        in[shape.in_e(k)] = slots[k]->e_out;
    }
    const auto ratios = light_ratios(light);
    for (std::size_t c = 0; c < 3; ++c)
        in[shape.in_light(c)] = ratios[c];
    in[shape.in_touch()] = touched ? 1.0 : 0.0;
    return in;
}

} // namespace bookcell
