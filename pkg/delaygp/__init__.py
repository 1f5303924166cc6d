# Delay-aware GP tracking control package
