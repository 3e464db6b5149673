#pragma once

namespace tetrecon
{
    /// Caps the worker threads used by the renderer (1 = fully deterministic).
    void set_num_threads(int n);
    int get_num_threads();
}
