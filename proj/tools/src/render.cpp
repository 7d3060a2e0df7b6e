#include "eitbin_cli/commands.hpp"

#include "eitbin/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace eitbin::cli {

void render_field(const Mesh& mesh, const ConductivityField& field, int size, std::ostream& image,
                  std::ostream& legend) {
    if (size < 1) throw DomainError("render: image size must be positive");
    if (field.size() != mesh.num_elements()) throw DomainError("render: field does not match the mesh");
    const double lo = field.min();
    const double hi = field.max();
    auto gray = [&](double v) {
        if (!(hi > lo)) return 255;
        return 1 + static_cast<int>(std::lround(254.0 * (v - lo) / (hi - lo)));
    };

    const MeshLocator locator(mesh);
    const double cell = 2.0 * mesh.radius / size;
    image << "P2\n" << size << ' ' << size << "\n255\n";
    for (int row = 0; row < size; ++row) {
        // Row 0 is the top of the image (largest y).
        const double y = mesh.radius - (row + 0.5) * cell;
        for (int col = 0; col < size; ++col) {
            const double x = -mesh.radius + (col + 0.5) * cell;
            const int e = locator.locate({x, y});
            image << (e < 0 ? 0 : gray(field[static_cast<std::size_t>(e)])) << (col + 1 < size ? ' ' : '\n');
        }
    }

    legend << std::setprecision(17) << "outside = 0\n"
           << "min_value = " << lo << "\n"
           << "max_value = " << hi << "\n";
    if (hi > lo) {
        legend << "gray = 1 + round(254 * (value - min_value) / (max_value - min_value))\n";
    } else {
        legend << "gray = 255\n";
    }
}

int cmd_render(const RenderCommand& command, std::ostream& out, std::ostream&) {
    Mesh mesh;
    ConductivityField field;
    try {
        mesh = load_mesh(command.mesh_path);
        field = load_field(command.field_path);
    } catch (const DomainError& e) {
        throw IoError(std::string("cannot parse input: ") + e.what());
    }
    if (field.size() != mesh.num_elements()) {
        throw IoError(command.field_path + ": " + std::to_string(field.size()) + " values for " +
                      std::to_string(mesh.num_elements()) + " elements");
    }
    const std::string legend_path = command.image_path + ".legend.txt";
    std::ofstream image(command.image_path);
    if (!image) throw IoError("cannot write " + command.image_path);
    std::ofstream legend(legend_path);
    if (!legend) throw IoError("cannot write " + legend_path);
    render_field(mesh, field, command.size, image, legend);
    if (!image || !legend) throw IoError("failed writing " + command.image_path);
    out << "rendered " << command.size << "x" << command.size << " -> " << command.image_path << ", "
        << legend_path << '\n';
    return exit_ok;
}

}  // namespace eitbin::cli
