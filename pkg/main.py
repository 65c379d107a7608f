import sys

from clustermps.utils.system_utils import pin_blas_threads

# Pin BLAS before numpy is imported by the app
pin_blas_threads()

from clustermps.cli.app import ClusterSimApp  # noqa: E402

if __name__ == "__main__":
    app = ClusterSimApp()
    sys.exit(app.run())
