import time

# imported by the acceptance suite to bound total runtime
SESSION_START = time.time()
